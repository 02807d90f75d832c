//! Dormand–Prince 8(5,3) stepper. No continuous extension; callers land
//! on output times with [`Dop853::advance_to`].
//!
//! The local error is measured in the max norm over components rather than
//! the RMS norm. With many near-zero amplitudes the RMS average lets the few
//! large ones drift well past the requested tolerance.

#![allow(clippy::excessive_precision)]

use super::{singular, OdeSystem, StepStats, Tolerances};
use crate::error::{Error, Result};

const C: [f64; 12] = [
    0.0,
    0.526001519587677318785587544488e-1,
    0.789002279381515978178381316732e-1,
    0.118350341907227396726757197510,
    0.281649658092772603273242802490,
    0.333333333333333333333333333333,
    0.25,
    0.307692307692307692307692307692,
    0.651282051282051282051282051282,
    0.6,
    0.857142857142857142857142857142,
    1.0,
];

/// Rows 2..=12 of the stage matrix.
const A: [&[f64]; 11] = [
    &[5.26001519587677318785587544488e-2],
    &[
        1.97250569845378994544595329183e-2,
        5.91751709536136983633785987549e-2,
    ],
    &[
        2.95875854768068491816892993775e-2,
        0.0,
        8.87627564304205475450678981324e-2,
    ],
    &[
        2.41365134159266685502369798665e-1,
        0.0,
        -8.84549479328286085344864962717e-1,
        9.24834003261792003115737966543e-1,
    ],
    &[
        3.7037037037037037037037037037e-2,
        0.0,
        0.0,
        1.70828608729473871279604482173e-1,
        1.25467687566822425016691814123e-1,
    ],
    &[
        3.7109375e-2,
        0.0,
        0.0,
        1.70252211019544039314978060272e-1,
        6.02165389804559606850219397283e-2,
        -1.7578125e-2,
    ],
    &[
        3.70920001185047927108779319836e-2,
        0.0,
        0.0,
        1.70383925712239993810214054705e-1,
        1.07262030446373284651809199168e-1,
        -1.53194377486244017527936158236e-2,
        8.27378916381402288758473766002e-3,
    ],
    &[
        6.24110958716075717114429577812e-1,
        0.0,
        0.0,
        -3.36089262944694129406857109825,
        -8.68219346841726006818189891453e-1,
        2.75920996994467083049415600797e1,
        2.01540675504778934086186788979e1,
        -4.34898841810699588477366255144e1,
    ],
    &[
        4.77662536438264365890433908527e-1,
        0.0,
        0.0,
        -2.48811461997166764192642586468,
        -5.90290826836842996371446475743e-1,
        2.12300514481811942347288949897e1,
        1.52792336328824235832596922938e1,
        -3.32882109689848629194453265587e1,
        -2.03312017085086261358222928593e-2,
    ],
    &[
        -9.3714243008598732571704021658e-1,
        0.0,
        0.0,
        5.18637242884406370830023853209,
        1.09143734899672957818500254654,
        -8.14978701074692612513997267357,
        -1.85200656599969598641566180701e1,
        2.27394870993505042818970056734e1,
        2.49360555267965238987089396762,
        -3.0467644718982195003823669022,
    ],
    &[
        2.27331014751653820792359768449,
        0.0,
        0.0,
        -1.05344954667372501984066689879e1,
        -2.00087205822486249909675718444,
        -1.79589318631187989172765950534e1,
        2.79488845294199600508499808837e1,
        -2.85899827713502369474065508674,
        -8.87285693353062954433549289258,
        1.23605671757943030647266201528e1,
        6.43392746015763530355970484046e-1,
    ],
];

const B: [f64; 12] = [
    5.42937341165687622380535766363e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566,
    1.89151789931450038304281599044,
    -5.8012039600105847814672114227,
    3.1116436695781989440891606237e-1,
    -1.52160949662516078556178806805e-1,
    2.01365400804030348374776537501e-1,
    4.47106157277725905176885569043e-2,
];

// 3rd order embedded weights on stages 1, 9, 12.
const BHH: [f64; 3] = [
    0.244094488188976377952755905512,
    0.733846688281611857341361741547,
    0.220588235294117647058823529412e-1,
];

// 5th order error weights; stages 2..=5 do not enter.
const ER: [f64; 12] = [
    0.1312004499419488073250102996e-1,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.1225156446376204440720569753e1,
    -0.4957589496572501915214079952,
    0.1664377182454986536961530415e1,
    -0.3503288487499736816886487290,
    0.3341791187130174790297318841,
    0.8192320648511571246570742613e-1,
    -0.2235530786388629525884427845e-1,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;

pub struct Dop853<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    tol: Tolerances,
    max_steps: usize,
    t: f64,
    y: Vec<f64>,
    h: f64,
    k: [Vec<f64>; 12],
    y_stage: Vec<f64>,
    sum_b: Vec<f64>,
    sum_e: Vec<f64>,
    y_new: Vec<f64>,
    stats: StepStats,
}

impl<'a, S: OdeSystem + ?Sized> Dop853<'a, S> {
    pub fn new(sys: &'a S, t0: f64, y0: &[f64], tol: Tolerances) -> Result<Self> {
        let tol = tol.check()?;
        let n = sys.dim();
        if y0.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: y0.len(),
            });
        }
        let mut stepper = Self {
            sys,
            tol,
            max_steps: 50_000_000,
            t: t0,
            y: y0.to_vec(),
            h: 0.0,
            k: std::array::from_fn(|_| vec![0.0; n]),
            y_stage: vec![0.0; n],
            sum_b: vec![0.0; n],
            sum_e: vec![0.0; n],
            y_new: vec![0.0; n],
            stats: StepStats::default(),
        };
        stepper.stats.evaluations += 1;
        sys.rhs(t0, y0, &mut stepper.k[0])
            .map_err(|e| singular(t0, e))?;
        stepper.h = stepper.initial_step()?;
        Ok(stepper)
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    fn scale(&self, i: usize) -> f64 {
        self.tol.abs + self.tol.rel * self.y[i].abs()
    }

    fn initial_step(&mut self) -> Result<f64> {
        let n = self.y.len() as f64;
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..self.y.len() {
            let sk = self.scale(i);
            dnf += (self.k[0][i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            0.01 * (dny / dnf).sqrt()
        };
        if !h.is_finite() {
            h = 1e-6;
        }
        for i in 0..self.y.len() {
            self.y_stage[i] = self.y[i] + h * self.k[0][i];
        }
        self.stats.evaluations += 1;
        let t1 = self.t + h;
        self.sys
            .rhs(t1, &self.y_stage, &mut self.k[1])
            .map_err(|e| singular(t1, e))?;
        let mut der2 = 0.0;
        for i in 0..self.y.len() {
            der2 += ((self.k[1][i] - self.k[0][i]) / self.scale(i)).powi(2);
        }
        let der12 = ((der2 / n).sqrt() / h).max((dnf / n).sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(1.0 / 8.0)
        };
        Ok((100.0 * h).min(h1))
    }

    /// All stages of a trial step; leaves the 8th order result in `y_new`
    /// and returns the scaled error.
    fn attempt(&mut self, h: f64) -> Result<f64> {
        let n = self.y.len();
        // Component loops innermost so they vectorize; the per-component
        // summation order over stages is unchanged.
        let acc = &mut self.sum_b;
        for s in 1..12 {
            acc.fill(0.0);
            for (j, &a) in A[s - 1].iter().enumerate() {
                if a != 0.0 {
                    for (acc, k) in acc.iter_mut().zip(&self.k[j]) {
                        *acc += a * k;
                    }
                }
            }
            for ((ys, y), acc) in self.y_stage.iter_mut().zip(&self.y).zip(acc.iter()) {
                *ys = y + h * acc;
            }
            self.sys
                .rhs(self.t + C[s] * h, &self.y_stage, &mut self.k[s])?;
        }
        self.stats.evaluations += 11;

        self.sum_b.fill(0.0);
        self.sum_e.fill(0.0);
        for s in 0..12 {
            for ((b, e), k) in self
                .sum_b
                .iter_mut()
                .zip(self.sum_e.iter_mut())
                .zip(&self.k[s])
            {
                *b += B[s] * k;
                *e += ER[s] * k;
            }
        }
        let (mut err5, mut err3) = (0.0, 0.0);
        for i in 0..n {
            let (sum_b, sum_e) = (self.sum_b[i], self.sum_e[i]);
            self.y_new[i] = self.y[i] + h * sum_b;
            let sk = self.tol.abs + self.tol.rel * self.y[i].abs().max(self.y_new[i].abs());
            let e3 = sum_b - BHH[0] * self.k[0][i] - BHH[1] * self.k[8][i] - BHH[2] * self.k[11][i];
            err3 = f64::max(err3, (e3 / sk).powi(2));
            err5 = f64::max(err5, (sum_e / sk).powi(2));
        }
        let mut deno = err5 + 0.01 * err3;
        if deno <= 0.0 {
            deno = 1.0;
        }
        Ok(h.abs() * err5 * (1.0 / deno).sqrt())
    }

    /// Takes one accepted step, never going past `t_limit`, landing on it exactly.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        if t_limit <= self.t {
            return Err(Error::Domain(format!(
                "step limit {t_limit} is not ahead of current time {}",
                self.t
            )));
        }
        let mut h = self.h;
        let mut last_reason: Option<Error> = None;
        loop {
            if self.stats.accepted + self.stats.rejected >= self.max_steps {
                return Err(Error::TooManySteps {
                    tau: self.t,
                    max_steps: self.max_steps,
                });
            }
            let remaining = t_limit - self.t;
            let lands = h >= remaining * (1.0 - 1e-12);
            if lands {
                h = remaining;
            }
            if h < 1e-14 * self.t.abs().max(1.0) && !lands {
                return Err(match last_reason {
                    Some(e) => singular(self.t, e),
                    None => Error::StepUnderflow { tau: self.t, h },
                });
            }
            let err = match self.attempt(h) {
                Ok(err) if err.is_finite() => err,
                Ok(_) => {
                    self.stats.rejected += 1;
                    h *= 0.25;
                    continue;
                }
                Err(e @ Error::Domain(_)) => {
                    last_reason = Some(e);
                    self.stats.rejected += 1;
                    h *= 0.25;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let fac11 = err.powf(1.0 / 8.0);
            if err <= 1.0 {
                let t_new = if lands { t_limit } else { self.t + h };
                self.stats.evaluations += 1;
                // First stage of the next step.
                self.sys
                    .rhs(t_new, &self.y_new, &mut self.k[1])
                    .map_err(|e| singular(t_new, e))?;
                self.k.swap(0, 1);
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.t = t_new;
                self.stats.accepted += 1;
                let fac = (fac11 / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let h_new = h / fac;
                self.h = if lands { h_new.max(self.h) } else { h_new };
                if last_reason.is_some() {
                    self.h = self.h.min(h);
                }
                return Ok(());
            }
            self.stats.rejected += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_reason = None;
        }
    }

    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        while self.t < t_target {
            self.step(t_target)?;
        }
        Ok(())
    }
}
