//! State vectors, exact static propagation, the direct time-dependent
//! integrator for the driven Hamiltonian, and sampled observables.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::{build_h_driven_rotating, build_h_full, SystemParams};
use crate::hilbert::{Basis, BasisState, Level, Operator, Qubit};
use crate::spectra::{eig_hermitian, EigenDecomposition};

/// Initial states must be normalized to this precision.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    basis: Arc<Basis>,
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    /// Normalized state; rejects wrong lengths and norms off by more than
    /// `NORM_TOLERANCE`.
    pub fn new(basis: Arc<Basis>, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: amplitudes.len(),
            });
        }
        let psi = StateVector { basis, amplitudes };
        psi.check_normalized()?;
        Ok(psi)
    }

    /// Rescale to unit norm.
    pub fn normalized(basis: Arc<Basis>, amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Invalid("cannot normalize a zero or non-finite vector".into()));
        }
        StateVector::new(basis, amplitudes / Complex64::new(norm, 0.0))
    }

    /// No normalization or length check; used for operator images.
    pub fn from_amplitudes_unchecked(basis: Arc<Basis>, amplitudes: DVector<Complex64>) -> Self {
        StateVector { basis, amplitudes }
    }

    pub fn basis_state(basis: &Arc<Basis>, s: &BasisState) -> Result<Self> {
        let i = basis.index_of(s).ok_or_else(|| Error::MissingState(s.to_string()))?;
        let mut amplitudes = DVector::zeros(basis.dim());
        amplitudes[i] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            basis: Arc::clone(basis),
            amplitudes,
        })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let drift = (self.norm() - 1.0).abs();
        if drift > NORM_TOLERANCE {
            return Err(Error::Invalid(format!("state norm is {}, expected 1", self.norm())));
        }
        Ok(())
    }

    fn same_space(&self, other: &StateVector) -> Result<()> {
        if self.basis != other.basis && *self.basis != *other.basis {
            return Err(Error::BasisMismatch("states live on different bases".into()));
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.same_space(other)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|<self|other>|`.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// `||self - other||`.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        self.same_space(other)?;
        Ok((&self.amplitudes - &other.amplitudes).norm())
    }

    /// Amplitude of one basis state, zero when absent.
    pub fn amplitude(&self, s: &BasisState) -> Complex64 {
        self.basis
            .index_of(s)
            .map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }
}

/// Sampled real channels sharing one strictly increasing time axis.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    channels: Vec<(String, Vec<f64>)>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        check_times(&times)?;
        Ok(TimeSeries {
            times,
            channels: Vec::new(),
        })
    }

    pub fn push_channel(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.times.len() {
            return Err(Error::DimensionMismatch {
                expected: self.times.len(),
                found: values.len(),
            });
        }
        if name == "t" || self.channel(&name).is_some() {
            return Err(Error::Invalid(format!("duplicate channel `{name}`")));
        }
        if name.contains(',') || name.contains('\n') {
            return Err(Error::Invalid(format!(
                "channel name `{name}` is not a plain CSV field"
            )));
        }
        self.channels.push((name, values));
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|(n, _)| n.as_str())
    }

    /// Header `t,<channels...>`, one row per sample, 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for (name, _) in &self.channels {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            out.push_str(&format_sig(*t));
            for (_, values) in &self.channels {
                let _ = write!(out, ",{}", format_sig(values[k]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Invalid("sample times must be finite".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("sample times must be strictly increasing".into()));
    }
    Ok(())
}

/// `n` evenly spaced samples covering `[start, end]`.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|k| start + (end - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// C `%.12g`: 12 significant digits, trailing zeros trimmed, exponent form
/// outside `1e-4 <= |x| < 1e12`.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..DIGITS).contains(&exp) {
        let fixed = format!("{:.*}", (DIGITS - 1 - exp) as usize, x);
        trim_fraction(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_fraction(mantissa), sign, exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Exact evolution `V exp(-i L t) V^dag` under a fixed Hermitian operator.
#[derive(Clone, Debug)]
pub struct StaticPropagator {
    eig: EigenDecomposition,
}

impl StaticPropagator {
    pub fn new(h: &Operator) -> Result<Self> {
        Ok(StaticPropagator { eig: eig_hermitian(h)? })
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    /// States at every `times[k]`, starting from `psi0` at `t = 0`.
    pub fn propagate(&self, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
        if psi0.amplitudes().len() != self.eig.basis().dim() || **psi0.basis() != **self.eig.basis() {
            return Err(Error::DimensionMismatch {
                expected: self.eig.basis().dim(),
                found: psi0.amplitudes().len(),
            });
        }
        psi0.check_normalized()?;
        let v = self.eig.vectors();
        let coefficients = v.adjoint() * psi0.amplitudes();
        Ok(times
            .iter()
            .map(|&t| {
                let phased = DVector::from_iterator(
                    coefficients.len(),
                    coefficients
                        .iter()
                        .zip(self.eig.values())
                        .map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t)),
                );
                StateVector::from_amplitudes_unchecked(Arc::clone(psi0.basis()), v * phased)
            })
            .collect())
    }
}

pub fn propagate_static(h: &Operator, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
    StaticPropagator::new(h)?.propagate(psi0, times)
}

/// `exp(-i w_d t N_tot)` applied to a rotating-frame state.
pub fn rotating_to_lab(w_d: f64, psi_rot: &StateVector, t: f64) -> StateVector {
    let basis = psi_rot.basis();
    let amplitudes = DVector::from_iterator(
        basis.dim(),
        basis
            .states()
            .iter()
            .zip(psi_rot.amplitudes().iter())
            .map(|(s, a)| a * Complex64::from_polar(1.0, -w_d * t * s.excitation_total() as f64)),
    );
    StateVector::from_amplitudes_unchecked(Arc::clone(basis), amplitudes)
}

/// Lab-frame states of the driven system, propagated exactly in the frame
/// rotating at `w_d`. The two frames coincide at `t = 0`.
pub fn propagate_driven(params: &SystemParams, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
    let h_rot = build_h_driven_rotating(params, psi0.basis())?;
    let rotating = propagate_static(&h_rot, psi0, times)?;
    Ok(rotating
        .iter()
        .zip(times)
        .map(|(psi, &t)| rotating_to_lab(params.w_d, psi, t))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    /// Largest RK4 step, in units of `1/g`.
    pub max_step: f64,
    /// Constant `c` removed from `H` during integration and restored as the
    /// exact phase `exp(-i c t)`. `None` picks the centre of the pair of
    /// levels the drive connects.
    pub energy_offset: Option<f64>,
    /// Largest tolerated `| ||psi|| - 1 |` at any sample.
    pub norm_tolerance: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            max_step: 1e-3,
            energy_offset: None,
            norm_tolerance: 1e-7,
        }
    }
}

/// Row-compressed copy of a dense matrix, zeros dropped.
struct Sparse {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
}

impl Sparse {
    fn from_operator(op: &Operator, shift: f64) -> Self {
        let m = op.matrix();
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let mut z = m[(i, j)];
                if i == j {
                    z -= Complex64::new(shift, 0.0);
                }
                if z != Complex64::new(0.0, 0.0) {
                    cols.push(j);
                    values.push(z);
                }
            }
            row_start.push(cols.len());
        }
        Sparse {
            row_start,
            cols,
            values,
        }
    }

    /// `out += factor * M x`.
    fn mul_add(&self, factor: Complex64, x: &DVector<Complex64>, out: &mut DVector<Complex64>) {
        for i in 0..self.row_start.len() - 1 {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            out[i] += factor * acc;
        }
    }
}

/// Direct fixed-step RK4 integration of
/// `i d/dt psi = [H + Omega (s_c^+ e^{-i w_d t} + s_c^- e^{i w_d t})] psi`
/// in the lab frame. Steps are shortened so every sample time is hit
/// exactly.
pub fn propagate_timedep(
    params: &SystemParams,
    psi0: &StateVector,
    times: &[f64],
    config: &IntegratorConfig,
) -> Result<Vec<StateVector>> {
    if !(config.max_step > 0.0 && config.max_step.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "max_step",
            reason: "must be positive and finite".into(),
        });
    }
    check_times(times)?;
    if times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Invalid("sample times must be non-negative".into()));
    }
    psi0.check_normalized()?;
    let basis = psi0.basis();
    let h = build_h_full(params, basis)?;
    let offset = match config.energy_offset {
        Some(c) => c,
        None => {
            let mean = h.expectation(psi0)?;
            if params.omega > 0.0 {
                mean + params.w_d / 2.0
            } else {
                mean
            }
        }
    };
    let h_sparse = Sparse::from_operator(&h, offset);
    let raise = Sparse::from_operator(&crate::hilbert::qubit_raising(basis, Qubit::Knob)?, 0.0);
    let lower = Sparse::from_operator(&crate::hilbert::qubit_lowering(basis, Qubit::Knob)?, 0.0);
    let minus_i = Complex64::new(0.0, -1.0);
    let (omega, w_d) = (params.omega, params.w_d);

    // d/dt psi = -i (H - c) psi - i Omega (...) psi
    let rhs = |t: f64, psi: &DVector<Complex64>, out: &mut DVector<Complex64>| {
        out.fill(Complex64::new(0.0, 0.0));
        h_sparse.mul_add(minus_i, psi, out);
        if omega != 0.0 {
            raise.mul_add(minus_i * omega * Complex64::from_polar(1.0, -w_d * t), psi, out);
            lower.mul_add(minus_i * omega * Complex64::from_polar(1.0, w_d * t), psi, out);
        }
    };

    let n = basis.dim();
    let mut psi = psi0.amplitudes().clone();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        DVector::zeros(n),
        DVector::zeros(n),
        DVector::zeros(n),
        DVector::zeros(n),
        DVector::zeros(n),
    );
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        let steps = (span / config.max_step).ceil().max(0.0) as usize;
        for k in 0..steps {
            let t0 = t + span * k as f64 / steps as f64;
            let h = span / steps as f64;
            rhs(t0, &psi, &mut k1);
            tmp.copy_from(&psi);
            tmp.axpy(Complex64::new(h / 2.0, 0.0), &k1, Complex64::new(1.0, 0.0));
            rhs(t0 + h / 2.0, &tmp, &mut k2);
            tmp.copy_from(&psi);
            tmp.axpy(Complex64::new(h / 2.0, 0.0), &k2, Complex64::new(1.0, 0.0));
            rhs(t0 + h / 2.0, &tmp, &mut k3);
            tmp.copy_from(&psi);
            tmp.axpy(Complex64::new(h, 0.0), &k3, Complex64::new(1.0, 0.0));
            rhs(t0 + h, &tmp, &mut k4);
            let w = Complex64::new(h / 6.0, 0.0);
            psi.axpy(w, &k1, Complex64::new(1.0, 0.0));
            psi.axpy(w * 2.0, &k2, Complex64::new(1.0, 0.0));
            psi.axpy(w * 2.0, &k3, Complex64::new(1.0, 0.0));
            psi.axpy(w, &k4, Complex64::new(1.0, 0.0));
        }
        t = target;
        let drift = (psi.norm() - 1.0).abs();
        if drift > config.norm_tolerance {
            return Err(Error::IntegratorDrift {
                drift,
                limit: config.norm_tolerance,
                step: config.max_step,
                time: t,
            });
        }
        let phase = Complex64::from_polar(1.0, -offset * t);
        out.push(StateVector::from_amplitudes_unchecked(Arc::clone(basis), &psi * phase));
    }
    Ok(out)
}

/// One sampled channel.
#[derive(Clone, Debug)]
pub enum Observable {
    /// `<psi|O|psi>` for Hermitian `O`.
    Expectation { name: String, op: Operator },
    /// `|<reference|psi>|`.
    Overlap { name: String, reference: StateVector },
}

impl Observable {
    pub fn expectation(name: impl Into<String>, op: Operator) -> Self {
        Observable::Expectation { name: name.into(), op }
    }

    pub fn overlap(name: impl Into<String>, reference: StateVector) -> Self {
        Observable::Overlap {
            name: name.into(),
            reference,
        }
    }

    fn name(&self) -> &str {
        match self {
            Observable::Expectation { name, .. } | Observable::Overlap { name, .. } => name,
        }
    }
}

/// Evaluate every observable on every state.
pub fn observe(times: &[f64], states: &[StateVector], observables: &[Observable]) -> Result<TimeSeries> {
    if times.len() != states.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: states.len(),
        });
    }
    let mut series = TimeSeries::new(times.to_vec())?;
    for obs in observables {
        let values = match obs {
            Observable::Expectation { op, .. } => {
                let deviation = op.hermiticity_error();
                if deviation >= crate::spectra::HERMITICITY_TOLERANCE {
                    return Err(Error::NotHermitian { deviation });
                }
                states
                    .iter()
                    .map(|psi| op.expectation(psi))
                    .collect::<Result<Vec<_>>>()?
            }
            Observable::Overlap { reference, .. } => states
                .iter()
                .map(|psi| reference.overlap(psi))
                .collect::<Result<Vec<_>>>()?,
        };
        series.push_channel(obs.name(), values)?;
    }
    Ok(series)
}

/// `|n1, n2, q1, q2, knob>` with the site qubits in `g`.
pub fn photon_state(basis: &Arc<Basis>, n1: u32, n2: u32, knob: Level) -> Result<StateVector> {
    StateVector::basis_state(basis, &BasisState::new(n1, n2, Level::Ground, Level::Ground, knob))
}
