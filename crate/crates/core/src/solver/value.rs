//! Exact cost-to-go of the charge/skip problem.
//!
//! `B_k(G)` is the cheapest way to finish the route from site `k` when the
//! battery has already gained `G` in total at sites `0..k`. It is piecewise
//! linear but neither convex nor continuous, so it is stored as a lower
//! envelope of closed linear pieces. Built once per instance from the
//! destination backwards; the search uses it as an exact completion bound.

use super::pwl::ConvexPwl;
use super::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    a: f64,
    b: f64,
    /// Value at `a`.
    va: f64,
    slope: f64,
}

impl Piece {
    fn at(&self, x: f64) -> f64 {
        self.va + self.slope * (x - self.a)
    }
}

/// Lower envelope of closed pieces, sorted by `a`, interiors disjoint.
#[derive(Debug, Clone, Default)]
pub(crate) struct Envelope {
    pieces: Vec<Piece>,
}

impl Envelope {
    fn constant(lo: f64, hi: f64) -> Self {
        Self {
            pieces: vec![Piece {
                a: lo,
                b: hi,
                va: 0.0,
                slope: 0.0,
            }],
        }
    }

    #[cfg(test)]
    pub fn value(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.a <= x && x <= p.b)
            .map(|p| p.at(x))
            .fold(f64::INFINITY, f64::min)
    }

    fn restrict(&self, lo: f64, hi: f64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .filter(|p| p.b >= lo && p.a <= hi)
            .map(|p| {
                let a = p.a.max(lo);
                Piece {
                    a,
                    b: p.b.min(hi),
                    va: p.at(a),
                    slope: p.slope,
                }
            })
            .collect();
        Self { pieces }
    }

    /// `G ↦ min { w·g + self(G + g) : lo ≤ g ≤ hi }`, one or two pieces per input piece.
    fn charge_pieces(&self, lo: f64, hi: f64, w: f64, out: &mut Vec<Piece>) {
        for p in &self.pieces {
            let vb = p.at(p.b);
            if w + p.slope >= 0.0 {
                // land as early as possible
                out.push(Piece {
                    a: p.a - hi,
                    b: p.a - lo,
                    va: w * hi + p.va,
                    slope: -w,
                });
                out.push(Piece {
                    a: p.a - lo,
                    b: p.b - lo,
                    va: w * lo + p.va,
                    slope: p.slope,
                });
            } else {
                out.push(Piece {
                    a: p.a - hi,
                    b: p.b - hi,
                    va: w * hi + p.va,
                    slope: p.slope,
                });
                out.push(Piece {
                    a: p.b - hi,
                    b: p.b - lo,
                    va: w * hi + vb,
                    slope: -w,
                });
            }
        }
    }

    /// Minimum of `f + self` over the common domain, or `None` if they do not meet.
    pub fn min_with(&self, f: &ConvexPwl, tol: f64) -> Option<f64> {
        let (s, e) = (f.start(), f.end());
        let first = self.pieces.partition_point(|p| p.b < s - tol);
        let mut best: Option<f64> = None;
        for p in self.pieces[first..].iter().take_while(|p| p.a <= e + tol) {
            let lo = p.a.max(s);
            let hi = p.b.min(e);
            if lo > hi + tol {
                continue;
            }
            let hi = hi.max(lo);
            let y = f.argmin_tilted(-p.slope, lo, hi);
            let v = f.value_at(y) + p.at(y);
            best = Some(best.map_or(v, |b| b.min(v)));
        }
        best
    }
}

/// Lower envelope of arbitrary closed pieces.
fn envelope(mut segs: Vec<Piece>) -> Envelope {
    segs.retain(|p| p.b >= p.a);
    if segs.is_empty() {
        return Envelope::default();
    }
    let mut xs: Vec<f64> = segs.iter().flat_map(|p| [p.a, p.b]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    segs.sort_by(|p, q| p.a.total_cmp(&q.a));

    let mut out: Vec<Piece> = Vec::new();
    let mut active: Vec<Piece> = Vec::new();
    let mut next = 0;
    for (i, &x) in xs.iter().enumerate() {
        while next < segs.len() && segs[next].a <= x {
            active.push(segs[next]);
            next += 1;
        }
        active.retain(|p| p.b >= x);

        // value at the breakpoint itself; isolated points can undercut both sides
        let at_x = active.iter().map(|p| p.at(x)).fold(f64::INFINITY, f64::min);
        let Some(&r) = xs.get(i + 1) else {
            push_point(&mut out, x, at_x);
            break;
        };
        let spanning: Vec<Piece> = active.iter().filter(|p| p.b >= r).copied().collect();
        let before = out.len();
        lines_min(&spanning, x, r, &mut out);
        let left = out.get(before).filter(|p| p.a == x).map_or(f64::INFINITY, |p| p.va);
        let prev = out[..before]
            .last()
            .filter(|p| p.b == x)
            .map_or(f64::INFINITY, |p| p.at(x));
        if at_x < left.min(prev) {
            out.insert(
                before,
                Piece {
                    a: x,
                    b: x,
                    va: at_x,
                    slope: 0.0,
                },
            );
        }
    }
    Envelope { pieces: merge(out) }
}

fn push_point(out: &mut Vec<Piece>, x: f64, v: f64) {
    if !v.is_finite() {
        return;
    }
    if let Some(last) = out.last() {
        if last.b == x && last.at(x) <= v {
            return;
        }
    }
    out.push(Piece {
        a: x,
        b: x,
        va: v,
        slope: 0.0,
    });
}

/// Pointwise minimum of lines that all span `[l, r]`.
fn lines_min(lines: &[Piece], l: f64, r: f64, out: &mut Vec<Piece>) {
    let key = |p: &Piece| (p.at(l), p.slope);
    let Some(mut cur) = lines
        .iter()
        .copied()
        .min_by(|p, q| key(p).partial_cmp(&key(q)).unwrap_or(std::cmp::Ordering::Equal))
    else {
        return;
    };
    let mut x = l;
    loop {
        let fx = cur.at(x);
        let mut switch: Option<(f64, Piece)> = None;
        for p in lines.iter().filter(|p| p.slope < cur.slope) {
            let gap = p.at(x) - fx;
            let xc = if gap <= 0.0 { x } else { x + gap / (cur.slope - p.slope) };
            let better = match switch {
                None => true,
                Some((bx, bp)) => xc < bx || (xc == bx && p.slope < bp.slope),
            };
            if better {
                switch = Some((xc, *p));
            }
        }
        match switch {
            Some((xc, p)) if xc < r => {
                if xc > x {
                    out.push(Piece {
                        a: x,
                        b: xc,
                        va: fx,
                        slope: cur.slope,
                    });
                }
                x = xc;
                cur = p;
            }
            _ => {
                out.push(Piece {
                    a: x,
                    b: r,
                    va: fx,
                    slope: cur.slope,
                });
                return;
            }
        }
    }
}

/// Joins neighbours that continue the same line.
fn merge(pieces: Vec<Piece>) -> Vec<Piece> {
    let mut out: Vec<Piece> = Vec::with_capacity(pieces.len());
    for p in pieces {
        if let Some(last) = out.last_mut() {
            let scale = 1e-12 * (1.0 + last.va.abs() + p.va.abs());
            if last.b == p.a && (last.slope == p.slope || p.a == p.b) && (last.at(p.a) - p.va).abs() <= scale {
                last.b = p.b;
                continue;
            }
        }
        out.push(p);
    }
    out
}

/// `B_0 ..= B_n` for the model, `B_k` taking `G_{k-1}` (gain before site `k`).
pub(crate) fn cost_to_go(m: &Model) -> Vec<Envelope> {
    let mut stages = vec![Envelope::default(); m.n + 1];
    for k in (0..m.n).rev() {
        let (lo, hi) = (m.lower[k] - m.tol, m.upper[k] + m.tol);
        let after = if k + 1 == m.n {
            Envelope::constant(lo, hi)
        } else {
            stages[k + 1].restrict(lo, hi)
        };
        let mut segs = after.pieces.clone();
        if m.can_charge(k) {
            let (glo, ghi) = m.decision_box(k, true);
            after.charge_pieces(glo, ghi, m.weight[k], &mut segs);
        }
        stages[k] = envelope(segs);
    }
    stages
}
