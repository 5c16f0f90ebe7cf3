//! Per-mode kernel sums.
//!
//! With increments `a_1..a_n` of one mode and the hat kernel
//! `psi_j(l) = min(l h, M_j - l h)+`, `M_j = min(M, (n - j) h)`, define
//! `U_i = sum_{j<i} psi_j(i - j) conj(a_j)`. Every path returns
//! `A = sum_i U_i a_i` and `B = sum_i U_{i-1} a_i`.

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Kernel geometry of one mode on one grid.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Window {
    pub n: usize,
    pub h: f64,
    /// Support length `min(1/|lambda_bar|, T)`.
    pub support: f64,
}

impl Window {
    #[inline]
    pub fn local_support(&self, j: usize) -> f64 {
        self.support.min((self.n - j) as f64 * self.h)
    }

    #[inline]
    pub fn psi(&self, lag: usize, j: usize) -> f64 {
        let v = lag as f64 * self.h;
        v.min(self.local_support(j) - v).max(0.0)
    }

    /// Right-continuous derivative of `psi` in the lag.
    #[inline]
    pub fn psi_dt(&self, lag: usize, j: usize) -> f64 {
        let v = lag as f64 * self.h;
        let m = self.local_support(j);
        if v >= m {
            0.0
        } else if v < 0.5 * m {
            1.0
        } else {
            -1.0
        }
    }

    /// Number of lags that can carry weight: `ceil(support / h)`.
    pub fn lag_bound(&self) -> usize {
        (self.support / self.h).ceil() as usize
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Sums {
    pub a: Complex64,
    pub b: Complex64,
}

fn accumulate(a: &[Complex64], mut u_at: impl FnMut(usize) -> Complex64) -> Sums {
    let mut out = Sums::default();
    let mut prev = ZERO;
    for i in 1..=a.len() {
        let u = u_at(i);
        let ai = a[i - 1];
        out.a += u * ai;
        out.b += prev * ai;
        prev = u;
    }
    out
}

/// Sum over all `j < i`, or the last `lags` of them.
pub(crate) fn windowed(a: &[Complex64], win: Window, lags: Option<usize>) -> Sums {
    accumulate(a, |i| {
        let lo = lags.map_or(1, |w| i.saturating_sub(w).max(1));
        let mut u = ZERO;
        for j in lo..i {
            u += a[j - 1].conj() * win.psi(i - j, j);
        }
        u
    })
}

/// `sum_i a_i sum_{j<i} psi_dt conj(a_j)` on the pruned range.
pub(crate) fn derivative_sum(a: &[Complex64], win: Window) -> Complex64 {
    let w = win.lag_bound();
    let mut out = ZERO;
    for i in 1..=a.len() {
        let mut d = ZERO;
        for j in i.saturating_sub(w).max(1)..i {
            d += a[j - 1].conj() * win.psi_dt(i - j, j);
        }
        out += d * a[i - 1];
    }
    out
}

/// O(n) evaluation from prefix sums of `conj(a_j)` and `j conj(a_j)`.
pub(crate) fn running(a: &[Complex64], win: Window) -> Sums {
    let n = a.len();
    let h = win.h;
    let m = win.support;
    // s0[j] = sum_{q<=j} conj(a_q), s1[j] = sum_{q<=j} q conj(a_q).
    let mut s0 = vec![ZERO; n + 1];
    let mut s1 = vec![ZERO; n + 1];
    for j in 1..=n {
        let c = a[j - 1].conj();
        s0[j] = s0[j - 1] + c;
        s1[j] = s1[j - 1] + c * j as f64;
    }
    let range = |lo: usize, hi: usize| -> (Complex64, Complex64) {
        if lo > hi {
            (ZERO, ZERO)
        } else {
            (s0[hi] - s0[lo - 1], s1[hi] - s1[lo - 1])
        }
    };

    // Lags on the rising side, and the last lag inside the support.
    let mut rise = (m / (2.0 * h)).floor() as usize;
    while rise > 0 && rise as f64 * h > m - rise as f64 * h {
        rise -= 1;
    }
    while (rise + 1) as f64 * h <= m - (rise + 1) as f64 * h {
        rise += 1;
    }
    let mut last = (m / h).ceil() as usize;
    while last > 0 && last as f64 * h >= m {
        last -= 1;
    }
    // First index whose local support is clipped by the horizon.
    let mut clip_start = 1usize;
    while clip_start <= n && ((n - clip_start) as f64 * h) >= m {
        clip_start += 1;
    }

    accumulate(a, |i| {
        let fi = i as f64;
        let mut u = ZERO;
        let unclipped_hi = (i - 1).min(clip_start - 1);
        // Rising part: psi = (i - j) h.
        let (d0, d1) = range(i.saturating_sub(rise).max(1), unclipped_hi);
        u += (d0 * fi - d1) * h;
        // Falling part: psi = M - (i - j) h.
        if last > rise {
            let lo = i.saturating_sub(last).max(1);
            let hi = unclipped_hi.min(i.saturating_sub(rise + 1));
            if i > rise + 1 {
                let (d0, d1) = range(lo, hi);
                u += d0 * m - (d0 * fi - d1) * h;
            }
        }
        // Clipped part: psi = min((i - j) h, (n - i) h).
        let b_lo = clip_start.max(1);
        if b_lo < i {
            let near_lo = b_lo.max((2 * i).saturating_sub(n));
            let (d0, d1) = range(near_lo, i - 1);
            u += (d0 * fi - d1) * h;
            let far_hi = (i - 1).min(near_lo - 1);
            let (d0, _) = range(b_lo, far_hi);
            u += d0 * ((n - i) as f64 * h);
        }
        u
    })
}
