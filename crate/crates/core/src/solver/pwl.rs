//! Convex piecewise-linear functions on a closed interval.
//!
//! Used for the forward value function of the continuous relaxation:
//! `F_k(G)` = cheapest way to have bought `G` kWh in total at sites `0..=k`.
//! Adding a site is an infimal convolution with a linear cost on a box, which
//! for convex functions reduces to merging slope-sorted segments.

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ConvexPwl {
    start: f64,
    base: f64,
    width: f64,
    // (slope, length), slopes non-decreasing
    segs: Vec<(f64, f64)>,
}

impl ConvexPwl {
    /// The function that is 0 at `x` and undefined elsewhere.
    pub fn point(x: f64) -> Self {
        Self {
            start: x,
            base: 0.0,
            width: 0.0,
            segs: Vec::new(),
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.start + self.width
    }

    /// Value at the left end of the domain; the minimum when all slopes are ≥ 0.
    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let mut v = self.base;
        let mut at = self.start;
        for &(slope, len) in &self.segs {
            let step = (x - at).clamp(0.0, len);
            v += slope * step;
            at += len;
        }
        v
    }

    /// `G ↦ min { F(G − g) + slope·g : lo ≤ g ≤ hi }`.
    pub fn add_box(&mut self, lo: f64, hi: f64, slope: f64) {
        self.start += lo;
        self.base += slope * lo;
        let len = hi - lo;
        if len > 0.0 {
            let at = self.segs.partition_point(|&(s, _)| s <= slope);
            self.segs.insert(at, (slope, len));
            self.width += len;
        }
    }

    /// Restricts the domain to `[lo, hi]`. Returns `false` if the
    /// intersection is empty by more than `tol`.
    pub fn restrict(&mut self, lo: f64, hi: f64, tol: f64) -> bool {
        let new_lo = lo.max(self.start);
        let new_hi = hi.min(self.end());
        if new_lo > new_hi + tol {
            return false;
        }
        let new_hi = new_hi.max(new_lo);
        self.trim_right(self.end() - new_hi);
        self.trim_left(new_lo - self.start);
        true
    }

    fn trim_left(&mut self, amount: f64) {
        if amount <= 0.0 {
            return;
        }
        let amount = amount.min(self.width);
        let mut left = amount;
        let mut drop = 0;
        for seg in self.segs.iter_mut() {
            if left <= 0.0 {
                break;
            }
            if seg.1 <= left {
                self.base += seg.0 * seg.1;
                left -= seg.1;
                drop += 1;
            } else {
                self.base += seg.0 * left;
                seg.1 -= left;
                left = 0.0;
            }
        }
        self.segs.drain(..drop);
        self.start += amount;
        self.width = (self.width - amount).max(0.0);
    }

    fn trim_right(&mut self, amount: f64) {
        if amount <= 0.0 {
            return;
        }
        let amount = amount.min(self.width);
        let mut left = amount;
        while left > 0.0 {
            let Some(last) = self.segs.last_mut() else { break };
            if last.1 <= left {
                left -= last.1;
                self.segs.pop();
            } else {
                last.1 -= left;
                left = 0.0;
            }
        }
        self.width = (self.width - amount).max(0.0);
    }

    /// Smallest minimiser of `F(y) − slope·y` over `y ∈ [lo, hi] ∩ dom F`.
    pub fn argmin_tilted(&self, slope: f64, lo: f64, hi: f64) -> f64 {
        let mut y = self.start;
        for &(s, len) in &self.segs {
            if s < slope {
                y += len;
            } else {
                break;
            }
        }
        let lo = lo.max(self.start);
        let hi = hi.min(self.end());
        if lo > hi {
            return 0.5 * (lo + hi);
        }
        y.clamp(lo, hi)
    }
}
