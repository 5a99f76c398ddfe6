//! Constant-velocity Kalman filter over `(cx, cy, s, vx, vy, vs)` with
//! `s = w * h`. The aspect ratio is carried outside the state and only
//! refreshed on measurement updates.

use alloc::format;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::model::{BBox, Detection};
use crate::{Error, Result};

type Mat6 = [[f64; 6]; 6];
type Mat3 = [[f64; 3]; 3];

/// Noise model, all values are standard deviations except the process
/// noise terms, which are per-frame variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanParams {
    pub init_pos_sigma: f64,
    pub init_vel_sigma: f64,
    pub init_size_sigma: f64,
    pub init_size_vel_sigma: f64,
    pub process_pos: f64,
    pub process_vel: f64,
    pub process_size: f64,
    pub process_size_vel: f64,
    pub meas_pos_sigma: f64,
    pub meas_size_sigma: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        KalmanParams {
            init_pos_sigma: 1.0,
            init_vel_sigma: 10.0,
            init_size_sigma: 10.0,
            init_size_vel_sigma: 10.0,
            process_pos: 1e-2,
            process_vel: 1e-4,
            process_size: 1e-2,
            process_size_vel: 1e-4,
            meas_pos_sigma: 1.0,
            meas_size_sigma: 10.0,
        }
    }
}

impl KalmanParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.init_pos_sigma,
            self.init_vel_sigma,
            self.init_size_sigma,
            self.init_size_vel_sigma,
            self.process_pos,
            self.process_vel,
            self.process_size,
            self.process_size_vel,
            self.meas_pos_sigma,
            self.meas_size_sigma,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("kalman parameters must be positive: {all:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub mean: [f64; 6],
    pub covariance: Mat6,
    pub w_over_h: f64,
    params: KalmanParams,
}

impl KalmanState {
    /// Zero-velocity state centred on the detection.
    pub fn init(det: &Detection, params: &KalmanParams) -> Self {
        let b = det.bbox;
        let diag = [
            params.init_pos_sigma * params.init_pos_sigma,
            params.init_pos_sigma * params.init_pos_sigma,
            params.init_size_sigma * params.init_size_sigma,
            params.init_vel_sigma * params.init_vel_sigma,
            params.init_vel_sigma * params.init_vel_sigma,
            params.init_size_vel_sigma * params.init_size_vel_sigma,
        ];
        let mut covariance = [[0.0; 6]; 6];
        for (i, d) in diag.iter().enumerate() {
            covariance[i][i] = *d;
        }
        KalmanState {
            mean: [b.cx, b.cy, b.area(), 0.0, 0.0, 0.0],
            covariance,
            w_over_h: b.w / b.h,
            params: *params,
        }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.mean[3], self.mean[4])
    }

    pub fn bbox(&self) -> BBox {
        // Area can drift non-positive under a decaying size velocity.
        let s = self.mean[2].max(1e-6);
        BBox {
            cx: self.mean[0],
            cy: self.mean[1],
            w: libm::sqrt(s * self.w_over_h),
            h: libm::sqrt(s / self.w_over_h),
        }
    }

    /// Advances one frame. Returns the predicted box and the forward
    /// centre displacement, i.e. predicted minus previous centre.
    pub fn predict(&mut self) -> (BBox, Vec2) {
        let before = self.center();
        for i in 0..3 {
            self.mean[i] += self.mean[i + 3];
        }
        // P <- F P F^T with F = [[I, I], [0, I]].
        let p = &mut self.covariance;
        for r in 0..6 {
            for c in 0..3 {
                p[r][c] += p[r][c + 3];
            }
        }
        for c in 0..6 {
            for r in 0..3 {
                p[r][c] += p[r + 3][c];
            }
        }
        let q = [
            self.params.process_pos,
            self.params.process_pos,
            self.params.process_size,
            self.params.process_vel,
            self.params.process_vel,
            self.params.process_size_vel,
        ];
        for (i, qi) in q.iter().enumerate() {
            p[i][i] += qi;
        }
        symmetrize(p);
        (self.bbox(), self.center() - before)
    }

    /// Measurement update on `(cx, cy, s)`, Joseph form.
    pub fn update(&mut self, det: &Detection) {
        let b = det.bbox;
        let z = [b.cx, b.cy, b.area()];
        let r = [
            self.params.meas_pos_sigma * self.params.meas_pos_sigma,
            self.params.meas_pos_sigma * self.params.meas_pos_sigma,
            self.params.meas_size_sigma * self.params.meas_size_sigma,
        ];
        let p = self.covariance;

        let mut s: Mat3 = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = p[i][j];
            }
            s[i][i] += r[i];
        }
        let s_inv = invert3(&s);

        // K = P H^T S^-1, H selects the first three state components.
        let mut k = [[0.0; 3]; 6];
        for i in 0..6 {
            for j in 0..3 {
                k[i][j] = (0..3).map(|m| p[i][m] * s_inv[m][j]).sum();
            }
        }

        let innovation = [z[0] - self.mean[0], z[1] - self.mean[1], z[2] - self.mean[2]];
        for i in 0..6 {
            self.mean[i] += (0..3).map(|j| k[i][j] * innovation[j]).sum::<f64>();
        }

        // A = I - K H
        let mut a = [[0.0; 6]; 6];
        for i in 0..6 {
            a[i][i] = 1.0;
            for j in 0..3 {
                a[i][j] -= k[i][j];
            }
        }
        let ap = matmul(&a, &p);
        let mut next = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                let mut v: f64 = (0..6).map(|m| ap[i][m] * a[j][m]).sum();
                v += (0..3).map(|m| k[i][m] * r[m] * k[j][m]).sum::<f64>();
                next[i][j] = v;
            }
        }
        symmetrize(&mut next);
        self.covariance = next;
        self.w_over_h = b.w / b.h;
    }

    pub fn covariance_trace(&self) -> f64 {
        (0..6).map(|i| self.covariance[i][i]).sum()
    }
}

fn matmul(a: &Mat6, b: &Mat6) -> Mat6 {
    let mut out = [[0.0; 6]; 6];
    for i in 0..6 {
        for m in 0..6 {
            let aim = a[i][m];
            if aim == 0.0 {
                continue;
            }
            for j in 0..6 {
                out[i][j] += aim * b[m][j];
            }
        }
    }
    out
}

fn symmetrize(p: &mut Mat6) {
    for i in 0..6 {
        for j in (i + 1)..6 {
            let v = 0.5 * (p[i][j] + p[j][i]);
            p[i][j] = v;
            p[j][i] = v;
        }
    }
}

fn invert3(m: &Mat3) -> Mat3 {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let inv = 1.0 / det;
    [
        [
            c00 * inv,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv,
        ],
        [
            c01 * inv,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv,
        ],
        [
            c02 * inv,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv,
        ],
    ]
}
