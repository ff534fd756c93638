//! Explicit Runge–Kutta integration of order 8(5,3) (Dormand–Prince) for complex state vectors.
//!
//! The stepper keeps its step size between calls so a trajectory can be advanced through many
//! output points without restarting the step-size controller.

use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, max_steps: 200_000 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at x = {0}")]
    StepSizeUnderflow(f64),
    #[error("maximum number of steps exceeded at x = {0}")]
    MaxSteps(f64),
    #[error("non-finite state at x = {0}")]
    NonFinite(f64),
}

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;

const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;

const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

const SAFE: f64 = 0.9;
const FAC1: f64 = 0.333;
const FAC2: f64 = 6.0;

/// Right-hand side `dy = f(x, y)` written into the output slice.
pub trait Rhs {
    fn eval(&mut self, x: f64, y: &[C64], dy: &mut [C64]);
}

impl<F: FnMut(f64, &[C64], &mut [C64])> Rhs for F {
    fn eval(&mut self, x: f64, y: &[C64], dy: &mut [C64]) {
        self(x, y, dy)
    }
}

/// Adaptive DOP853 stepper advancing a single trajectory.
pub struct Dop853 {
    opts: OdeOptions,
    x: f64,
    y: Vec<C64>,
    h: f64,
    k: [Vec<C64>; 10],
    y1: Vec<C64>,
    fsal: bool,
    steps: usize,
}

fn axpy_combo(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..out.len() {
        let mut acc = C64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        out[i] = y[i] + acc * h;
    }
}

impl Dop853 {
    pub fn new(x0: f64, y0: Vec<C64>, opts: OdeOptions) -> Self {
        let n = y0.len();
        let z = || vec![C64::new(0.0, 0.0); n];
        Dop853 {
            opts,
            x: x0,
            y: y0,
            h: 0.0,
            k: [z(), z(), z(), z(), z(), z(), z(), z(), z(), z()],
            y1: z(),
            fsal: false,
            steps: 0,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> &[C64] {
        &self.y
    }

    /// Replace the state, e.g. after an exact propagation over a force-free stretch.
    pub fn reset(&mut self, x: f64, y: &[C64]) {
        self.x = x;
        self.y.copy_from_slice(y);
        self.fsal = false;
    }

    fn initial_step<F: Rhs>(&mut self, f: &mut F, dir: f64, span: f64) -> f64 {
        let n = self.y.len() as f64;
        let (rtol, atol) = (self.opts.rtol, self.opts.atol);
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..self.y.len() {
            let sk = atol + rtol * self.y[i].norm();
            dnf += (self.k[0][i].norm() / sk).powi(2);
            dny += (self.y[i].norm() / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
        h = h.min(span);
        let x1 = self.x + dir * h;
        for i in 0..self.y.len() {
            self.y1[i] = self.y[i] + self.k[0][i] * (dir * h);
        }
        let (k0, rest) = self.k.split_at_mut(1);
        f.eval(x1, &self.y1, &mut rest[0]);
        let mut der2 = 0.0;
        for i in 0..self.y.len() {
            let sk = atol + rtol * self.y[i].norm();
            der2 += ((rest[0][i] - k0[0][i]).norm() / sk).powi(2);
        }
        let der2 = (der2 / n).sqrt() / h;
        let der12 = der2.max((dnf / n).sqrt());
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 8.0) };
        (100.0 * h).min(h1).min(span)
    }

    /// Advance to `x_end` exactly. The right-hand side must be smooth on the open interval.
    pub fn integrate_to<F: Rhs>(&mut self, f: &mut F, x_end: f64) -> Result<(), OdeError> {
        let span = (x_end - self.x).abs();
        if span == 0.0 {
            return Ok(());
        }
        let dir = if x_end > self.x { 1.0 } else { -1.0 };
        if !self.fsal {
            f.eval(self.x, &self.y, &mut self.k[0]);
            self.fsal = true;
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(f, dir, span);
        }
        let n = self.y.len();
        let (rtol, atol) = (self.opts.rtol, self.opts.atol);
        let mut h = self.h.min(span);
        let mut reject = false;
        loop {
            if self.steps >= self.opts.max_steps {
                return Err(OdeError::MaxSteps(self.x));
            }
            let remaining = (x_end - self.x).abs();
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h < 1e-14 * (1.0 + self.x.abs()) {
                return Err(OdeError::StepSizeUnderflow(self.x));
            }
            let hs = dir * h;
            let x = self.x;
            let [k1, k2, k3, k4, k5, k6, k7, k8, k9, k10] = &mut self.k;
            let y = &self.y;
            let y1 = &mut self.y1;
            axpy_combo(y1, y, hs, &[(A21, k1)]);
            f.eval(x + C2 * hs, y1, k2);
            axpy_combo(y1, y, hs, &[(A31, k1), (A32, k2)]);
            f.eval(x + C3 * hs, y1, k3);
            axpy_combo(y1, y, hs, &[(A41, k1), (A43, k3)]);
            f.eval(x + C4 * hs, y1, k4);
            axpy_combo(y1, y, hs, &[(A51, k1), (A53, k3), (A54, k4)]);
            f.eval(x + C5 * hs, y1, k5);
            axpy_combo(y1, y, hs, &[(A61, k1), (A64, k4), (A65, k5)]);
            f.eval(x + C6 * hs, y1, k6);
            axpy_combo(y1, y, hs, &[(A71, k1), (A74, k4), (A75, k5), (A76, k6)]);
            f.eval(x + C7 * hs, y1, k7);
            axpy_combo(y1, y, hs, &[(A81, k1), (A84, k4), (A85, k5), (A86, k6), (A87, k7)]);
            f.eval(x + C8 * hs, y1, k8);
            axpy_combo(
                y1,
                y,
                hs,
                &[(A91, k1), (A94, k4), (A95, k5), (A96, k6), (A97, k7), (A98, k8)],
            );
            f.eval(x + C9 * hs, y1, k9);
            axpy_combo(
                y1,
                y,
                hs,
                &[(A101, k1), (A104, k4), (A105, k5), (A106, k6), (A107, k7), (A108, k8), (A109, k9)],
            );
            f.eval(x + C10 * hs, y1, k10);
            axpy_combo(
                y1,
                y,
                hs,
                &[
                    (A111, k1),
                    (A114, k4),
                    (A115, k5),
                    (A116, k6),
                    (A117, k7),
                    (A118, k8),
                    (A119, k9),
                    (A1110, k10),
                ],
            );
            f.eval(x + C11 * hs, y1, k2);
            let xph = if last { x_end } else { x + hs };
            axpy_combo(
                y1,
                y,
                hs,
                &[
                    (A121, k1),
                    (A124, k4),
                    (A125, k5),
                    (A126, k6),
                    (A127, k7),
                    (A128, k8),
                    (A129, k9),
                    (A1210, k10),
                    (A1211, k2),
                ],
            );
            f.eval(xph, y1, k3);
            let mut err = 0.0;
            let mut err2 = 0.0;
            for i in 0..n {
                let inc = k1[i] * B1
                    + k6[i] * B6
                    + k7[i] * B7
                    + k8[i] * B8
                    + k9[i] * B9
                    + k10[i] * B10
                    + k2[i] * B11
                    + k3[i] * B12;
                k4[i] = inc;
                k5[i] = y[i] + inc * hs;
                let sk = atol + rtol * y[i].norm().max(k5[i].norm());
                let e2 = inc - k1[i] * BHH1 - k9[i] * BHH2 - k3[i] * BHH3;
                err2 += e2.norm_sqr() / (sk * sk);
                let e = k1[i] * ER1
                    + k6[i] * ER6
                    + k7[i] * ER7
                    + k8[i] * ER8
                    + k9[i] * ER9
                    + k10[i] * ER10
                    + k2[i] * ER11
                    + k3[i] * ER12;
                err += e.norm_sqr() / (sk * sk);
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h * err * (1.0 / (n as f64 * deno)).sqrt();
            if !err.is_finite() {
                return Err(OdeError::NonFinite(x));
            }
            self.steps += 1;
            let fac11 = err.powf(1.0 / 8.0);
            let fac = (1.0 / FAC2).max((1.0 / FAC1).min(fac11 / SAFE));
            let mut hnew = h / fac;
            if err <= 1.0 {
                if k5.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                    return Err(OdeError::NonFinite(x));
                }
                self.y.copy_from_slice(k5);
                f.eval(xph, &self.y, k4);
                std::mem::swap(k1, k4);
                if reject {
                    hnew = hnew.min(h);
                }
                reject = false;
                self.x = xph;
                if last {
                    // the clipped final step says nothing about the natural step size
                    return Ok(());
                }
                h = hnew;
                self.h = h;
            } else {
                hnew = h / (1.0 / FAC1).min(fac11 / SAFE);
                reject = true;
                h = hnew;
                self.h = h;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_round_trip() {
        // y'' = -y with y(0)=1, y'(0)=0
        let mut f = |_x: f64, y: &[C64], dy: &mut [C64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let mut s = Dop853::new(0.0, vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)], OdeOptions::default());
        for j in 1..=20 {
            let x = j as f64 * 0.5;
            s.integrate_to(&mut f, x).unwrap();
            assert!((s.y()[0].re - x.cos()).abs() < 1e-9, "x={x}");
        }
        s.integrate_to(&mut f, 0.0).unwrap();
        assert!((s.y()[0].re - 1.0).abs() < 1e-9);
        assert!(s.y()[1].norm() < 1e-9);
    }

    #[test]
    fn complex_exponential() {
        let lam = C64::new(-0.3, 2.0);
        let mut f = move |_x: f64, y: &[C64], dy: &mut [C64]| dy[0] = lam * y[0];
        let mut s = Dop853::new(0.0, vec![C64::new(1.0, 0.0)], OdeOptions::default());
        s.integrate_to(&mut f, 3.0).unwrap();
        let exact = (lam * 3.0).exp();
        assert!((s.y()[0] - exact).norm() < 1e-9 * exact.norm().max(1.0));
    }
}
