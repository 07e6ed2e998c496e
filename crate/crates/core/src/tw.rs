//! Tracy–Widom (beta = 1) distribution from an embedded table.
//!
//! The table holds `F_1(s)` on `s = -7.0, -6.9, ..., 8.0`. Values were computed
//! as the Fredholm determinant `F_1(s) = det(I - K_s)` with kernel
//! `K_s(x, y) = Ai((x + y)/2) / 2` on `L^2(s, inf)`, discretised by a 200-node
//! Gauss–Legendre Nyström rule on `[s, s + 30]` (Bornemann, "On the numerical
//! evaluation of distributions in random matrix theory", Markov Process. Relat.
//! Fields 16, 2010). A 140-node rule on `[s, s + 24]` agrees to 5e-14. The
//! table reproduces the classical percentiles tabulated by Tracy and Widom
//! (e.g. `F_1(0.9793) = 0.95`, `F_1(2.0234) = 0.99`) to better than 1e-5.
//!
//! Between nodes the CDF is interpolated with a monotone (Fritsch–Carlson)
//! cubic; quantiles invert that interpolant.

use crate::error::{Error, Result};

#[rustfmt::skip]
const TW1_CDF: [(f64, f64); 151] = [
    (-7.0, 5.482862525238351e-09),
    (-6.9, 1.101758636309216e-08),
    (-6.8, 2.174637764705716e-08),
    (-6.7, 4.217113795750112e-08),
    (-6.6, 8.036707869782280e-08),
    (-6.5, 1.505504310684954e-07),
    (-6.4, 2.772893761547280e-07),
    (-6.3, 5.022711863982418e-07),
    (-6.2, 8.949596567075429e-07),
    (-6.1, 1.569043970306793e-06),
    (-6.0, 2.707319324373791e-06),
    (-5.9, 4.598569584673410e-06),
    (-5.8, 7.691146675446174e-06),
    (-5.7, 1.266923991016218e-05),
    (-5.6, 2.055924609289192e-05),
    (-5.5, 3.287508833812893e-05),
    (-5.4, 5.181263569988421e-05),
    (-5.3, 8.050433783531411e-05),
    (-5.2, 1.233455467850905e-04),
    (-5.1, 1.864034488833756e-04),
    (-5.0, 2.779177549135111e-04),
    (-4.9, 4.088989965818419e-04),
    (-4.8, 5.938252185438673e-04),
    (-4.7, 8.514309222263574e-04),
    (-4.6, 1.205573366679759e-03),
    (-4.5, 1.686151036135308e-03),
    (-4.4, 2.330037764284656e-03),
    (-4.3, 3.181984433749928e-03),
    (-4.2, 4.295429342826746e-03),
    (-4.1, 5.733149410218931e-03),
    (-4.0, 7.567678598793920e-03),
    (-3.9, 9.881418451350260e-03),
    (-3.8, 1.276636941909851e-02),
    (-3.7, 1.632342136613845e-02),
    (-3.6, 2.066115743405178e-02),
    (-3.5, 2.589414699301920e-02),
    (-3.4, 3.214072975947464e-02),
    (-3.3, 3.952032284962041e-02),
    (-3.2, 4.815031363315724e-02),
    (-3.1, 5.814263151627903e-02),
    (-3.0, 6.960011886737695e-02),
    (-2.9, 8.261284295449844e-02),
    (-2.8, 9.725450505903457e-02),
    (-2.7, 1.135791084418298e-01),
    (-2.6, 1.316180427949381e-01),
    (-2.5, 1.513777291781606e-01),
    (-2.4, 1.728379469230500e-01),
    (-2.3, 1.959509339813456e-01),
    (-2.2, 2.206413166522275e-01),
    (-2.1, 2.468068858817357e-01),
    (-2.0, 2.743201979092372e-01),
    (-1.9, 3.030309394332201e-01),
    (-1.8, 3.327689639502269e-01),
    (-1.7, 3.633478783643035e-01),
    (-1.6, 3.945690387369514e-01),
    (-1.5, 4.262258019376008e-01),
    (-1.4, 4.581078761577864e-01),
    (-1.3, 4.900056174076761e-01),
    (-1.2, 5.217141303814754e-01),
    (-1.1, 5.530370492464920e-01),
    (-1.0, 5.837898955197532e-01),
    (-0.9, 6.138029346670051e-01),
    (-0.8, 6.429234788145002e-01),
    (-0.7, 6.710176085341216e-01),
    (-0.6, 6.979713107662491e-01),
    (-0.5, 7.236910515483989e-01),
    (-0.4, 7.481038205646201e-01),
    (-0.3, 7.711566991486144e-01),
    (-0.2, 7.928160140610687e-01),
    (-0.1, 8.130661461572449e-01),
    (-0.0, 8.319080662029649e-01),
    (0.1, 8.493576699764943e-01),
    (0.2, 8.654439819057144e-01),
    (0.3, 8.802072913876310e-01),
    (0.4, 8.936972791907962e-01),
    (0.5, 9.059711835032422e-01),
    (0.6, 9.170920467677014e-01),
    (0.7, 9.271270758874668e-01),
    (0.8, 9.361461400620994e-01),
    (0.9, 9.442204227142165e-01),
    (1.0, 9.514212369115568e-01),
    (1.1, 9.578190075128623e-01),
    (1.2, 9.634824180478414e-01),
    (1.3, 9.684777161000747e-01),
    (1.4, 9.728681676723584e-01),
    (1.5, 9.767136486166632e-01),
    (1.6, 9.800703596215757e-01),
    (1.7, 9.829906503692104e-01),
    (1.8, 9.855229381935989e-01),
    (1.9, 9.877117067850643e-01),
    (2.0, 9.895975710848283e-01),
    (2.1, 9.912173954035146e-01),
    (2.2, 9.926044528883319e-01),
    (2.3, 9.937886156799215e-01),
    (2.4, 9.947965663762489e-01),
    (2.5, 9.956520227045189e-01),
    (2.6, 9.963759685511683e-01),
    (2.7, 9.969868856828372e-01),
    (2.8, 9.975009815858227e-01),
    (2.9, 9.979324098431904e-01),
    (3.0, 9.982934803498807e-01),
    (3.1, 9.985948574344858e-01),
    (3.2, 9.988457446135688e-01),
    (3.3, 9.990540552558033e-01),
    (3.4, 9.992265688859374e-01),
    (3.5, 9.993690732215728e-01),
    (3.6, 9.994864923185834e-01),
    (3.7, 9.995830014136592e-01),
    (3.8, 9.996621292046407e-01),
    (3.9, 9.997268484105940e-01),
    (4.0, 9.997796555125670e-01),
    (4.1, 9.998226406007480e-01),
    (4.2, 9.998575482514063e-01),
    (4.3, 9.998858303338718e-01),
    (4.4, 9.999086916091919e-01),
    (4.5, 9.999271289327117e-01),
    (4.6, 9.999419648162012e-01),
    (4.7, 9.999538760447841e-01),
    (4.8, 9.999634179817676e-01),
    (4.9, 9.999710451329273e-01),
    (5.0, 9.999771284819562e-01),
    (5.1, 9.999819700518533e-01),
    (5.2, 9.999858150936829e-01),
    (5.3, 9.999888622547739e-01),
    (5.4, 9.999912720333118e-01),
    (5.5, 9.999931737854763e-01),
    (5.6, 9.999946715146418e-01),
    (5.7, 9.999958486396011e-01),
    (5.8, 9.999967719100252e-01),
    (5.9, 9.999974946121793e-01),
    (6.0, 9.999980591859275e-01),
    (6.1, 9.999984993550782e-01),
    (6.2, 9.999988418567132e-01),
    (6.3, 9.999991078411415e-01),
    (6.4, 9.999993140021585e-01),
    (6.5, 9.999994734871351e-01),
    (6.6, 9.999995966279157e-01),
    (6.7, 9.999996915262920e-01),
    (6.8, 9.999997645218054e-01),
    (6.9, 9.999998205645907e-01),
    (7.0, 9.999998635117946e-01),
    (7.1, 9.999998963626889e-01),
    (7.2, 9.999999214446721e-01),
    (7.3, 9.999999405601036e-01),
    (7.4, 9.999999551019353e-01),
    (7.5, 9.999999661445460e-01),
    (7.6, 9.999999745149636e-01),
    (7.7, 9.999999808485528e-01),
    (7.8, 9.999999856324845e-01),
    (7.9, 9.999999892395732e-01),
    (8.0, 9.999999919545756e-01),
];

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson slopes.
#[derive(Debug, Clone)]
pub(crate) struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub(crate) fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            slopes[i] = if a * b <= 0.0 {
                0.0
            } else {
                // weighted harmonic mean keeps each piece monotone
                let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
                let (w0, w1) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                (w0 + w1) / (w0 / a + w1 / b)
            };
        }
        Self { xs, ys, slopes }
    }

    pub(crate) fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Evaluates inside the node range; values outside are clamped to the end nodes.
    pub(crate) fn eval(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[last] {
            return self.ys[last];
        }
        let i = self.xs.partition_point(|&node| node <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

fn interpolant() -> &'static MonotoneCubic {
    static TABLE: std::sync::OnceLock<MonotoneCubic> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        MonotoneCubic::new(
            TW1_CDF.iter().map(|&(s, _)| s).collect(),
            TW1_CDF.iter().map(|&(_, f)| f).collect(),
        )
    })
}

/// `F_1(s)`. Outside `[-7, 8]` the end values of the table are returned.
pub fn tw_cdf(s: f64) -> f64 {
    interpolant().eval(s)
}

/// The `1 - xi` quantile `t_xi` of the Tracy–Widom law, i.e. `F_1(t_xi) = 1 - xi`.
pub fn tw_quantile(xi: f64) -> Result<f64> {
    let target = 1.0 - xi;
    let (lo_p, hi_p) = (TW1_CDF[0].1, TW1_CDF[TW1_CDF.len() - 1].1);
    if !(xi > 0.0 && xi < 1.0) || !(target > lo_p && target < hi_p) {
        return Err(Error::Range(format!("Tracy-Widom level xi = {xi}")));
    }
    let table = interpolant();
    let (mut lo, mut hi) = table.domain();
    // the interpolant is monotone, so bisection to machine resolution is exact enough
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if table.eval(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_are_ordered() {
        let q: Vec<f64> = [0.01, 0.05, 0.10]
            .iter()
            .map(|&xi| tw_quantile(xi).unwrap())
            .collect();
        assert!(q[0] > q[1] && q[1] > q[2]);
    }

    #[test]
    fn classical_percentiles() {
        // Tracy–Widom's published F_1 percentiles
        for (xi, t) in [(0.01, 2.0234), (0.05, 0.9793), (0.10, 0.4501), (0.50, -1.2686), (0.95, -3.1804)] {
            assert!((tw_quantile(xi).unwrap() - t).abs() < 1e-3, "xi = {xi}");
        }
    }

    #[test]
    fn leave_one_out_interpolation() {
        let mut worst: f64 = 0.0;
        for skip in 1..TW1_CDF.len() - 1 {
            let (xs, ys): (Vec<f64>, Vec<f64>) = TW1_CDF
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, &pair)| pair)
                .unzip();
            let reduced = MonotoneCubic::new(xs, ys);
            let (s, f) = TW1_CDF[skip];
            worst = worst.max((reduced.eval(s) - f).abs());
        }
        assert!(worst <= 1e-3, "worst leave-one-out error {worst}");
    }

    #[test]
    fn quantile_inverts_cdf() {
        for xi in [0.005, 0.025, 0.25, 0.5] {
            let t = tw_quantile(xi).unwrap();
            assert!((tw_cdf(t) - (1.0 - xi)).abs() < 1e-12);
        }
        assert!(tw_quantile(0.0).is_err());
        assert!(tw_quantile(1e-12).is_err());
    }

    #[test]
    fn cdf_monotone_and_clamped() {
        let mut prev = 0.0;
        for i in 0..=3000 {
            let s = -8.0 + i as f64 * 0.005;
            let f = tw_cdf(s);
            assert!(f >= prev);
            prev = f;
        }
        assert_eq!(tw_cdf(100.0), TW1_CDF[150].1);
    }
}
