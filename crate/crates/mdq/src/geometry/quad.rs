//! Adaptive Gauss–Legendre quadrature of small vector integrands.

#[allow(clippy::excessive_precision)]
const NODES: [(f64, f64); 5] = [
    (0.14887433898163122, 0.29552422471475298),
    (0.43339539412924721, 0.26926671930999652),
    (0.67940956829902444, 0.21908636251598201),
    (0.86506336668898454, 0.14945134915058036),
    (0.97390652851717174, 0.06667134430868807),
];
const MAX_DEPTH: u32 = 40;

fn rule<const K: usize>(f: &impl Fn(f64) -> [f64; K], a: f64, b: f64) -> [f64; K] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = [0.0; K];
    for (x, w) in NODES {
        let (p, q) = (f(c + h * x), f(c - h * x));
        for k in 0..K {
            acc[k] += w * (p[k] + q[k]);
        }
    }
    acc.map(|v| v * h)
}

/// `∫_a^b f` to absolute tolerance `tol` in every component.
pub fn integrate<const K: usize>(f: &impl Fn(f64) -> [f64; K], a: f64, b: f64, tol: f64) -> [f64; K] {
    refine(f, a, b, tol, rule(f, a, b), 0)
}

fn refine<const K: usize>(f: &impl Fn(f64) -> [f64; K], a: f64, b: f64, tol: f64, whole: [f64; K], depth: u32) -> [f64; K] {
    let m = 0.5 * (a + b);
    let (l, r) = (rule(f, a, m), rule(f, m, b));
    let err = (0..K).map(|k| (l[k] + r[k] - whole[k]).abs()).fold(0.0, f64::max);
    if err <= tol || depth >= MAX_DEPTH {
        let mut out = l;
        for k in 0..K {
            out[k] += r[k];
        }
        return out;
    }
    let (l, r) = (refine(f, a, m, tol / 2.0, l, depth + 1), refine(f, m, b, tol / 2.0, r, depth + 1));
    let mut out = l;
    for k in 0..K {
        out[k] += r[k];
    }
    out
}
