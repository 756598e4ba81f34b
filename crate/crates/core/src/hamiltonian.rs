//! Bismuth-donor spin Hamiltonian: construction, diagonalization, (F, m)
//! labeling, allowed transitions and field sweeps.
//!
//! The Hamiltonian (in Hz) is evaluated in the product basis |m_S⟩ ⊗ |m_I⟩
//! with both ladders ordered from +j down to −j:
//!
//! ```text
//! H/h = B0 (γe Sz − γn Iz) + A S·I
//! ```
//!
//! F_z commutes with H for a field along z, so every eigenvector has an exact
//! integer m. Within one m sector there are at most two states and they never
//! cross, which makes the adiabatic F label the energy rank within the sector.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{BI_NUCLEAR_SPIN, GAMMA_E, GAMMA_N, HYPERFINE_A};
use crate::{par, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Default floor below which transition matrix elements are dropped.
pub const MATRIX_ELEMENT_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinSystemParams {
    /// Electron gyromagnetic ratio, Hz/T.
    pub gamma_e: f64,
    /// Nuclear gyromagnetic ratio, Hz/T.
    pub gamma_n: f64,
    /// Isotropic hyperfine constant, Hz.
    pub hyperfine_a: f64,
    /// Electron spin quantum number. Only 1/2 is supported.
    pub electron_spin: f64,
    /// Nuclear spin quantum number; must be half-integer so that m is integer.
    pub nuclear_spin: f64,
}

impl Default for SpinSystemParams {
    fn default() -> Self {
        Self::bismuth()
    }
}

impl SpinSystemParams {
    /// Si:Bi donor.
    pub fn bismuth() -> Self {
        Self {
            gamma_e: GAMMA_E,
            gamma_n: GAMMA_N,
            hyperfine_a: HYPERFINE_A,
            electron_spin: 0.5,
            nuclear_spin: BI_NUCLEAR_SPIN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_e > 0.0) {
            return Err(Error::invalid("gamma_e must be positive"));
        }
        if !(self.hyperfine_a > 0.0) {
            return Err(Error::invalid("hyperfine_a must be positive"));
        }
        if !self.gamma_n.is_finite() {
            return Err(Error::invalid("gamma_n must be finite"));
        }
        if self.electron_spin != 0.5 {
            return Err(Error::invalid("only S = 1/2 donors are supported"));
        }
        let two_i = 2.0 * self.nuclear_spin;
        if !(self.nuclear_spin > 0.0) || two_i.fract() != 0.0 || (two_i as i64) % 2 != 1 {
            return Err(Error::invalid(
                "nuclear spin must be a positive half-integer",
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        multiplicity(self.electron_spin) * multiplicity(self.nuclear_spin)
    }

    /// F of the lower (F = I − 1/2) and upper (F = I + 1/2) hyperfine manifolds.
    pub fn manifolds(&self) -> (i32, i32) {
        let i2 = (2.0 * self.nuclear_spin).round() as i32;
        ((i2 - 1) / 2, (i2 + 1) / 2)
    }
}

fn multiplicity(j: f64) -> usize {
    (2.0 * j + 1.0).round() as usize
}

/// Dense Hermitian operator with entries in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    entries: CMatrix,
}

impl HermitianOperator {
    /// Wrap a matrix, checking Hermiticity to 1e-12 relative.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::invalid("operator must be square"));
        }
        let op = Self { entries };
        if op.hermiticity_defect() > 1e-12 * op.frobenius_norm().max(f64::MIN_POSITIVE) {
            return Err(Error::invalid("operator is not Hermitian"));
        }
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// max |H_ij − conj(H_ji)|
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).sum()
    }
}

/// Spin matrices (Jx, Jy, Jz) for quantum number `j`, basis m = j, j−1, …, −j.
pub fn spin_matrices(j: f64) -> [CMatrix; 3] {
    let d = multiplicity(j);
    let mut jp = CMatrix::zeros(d, d);
    let mut jz = CMatrix::zeros(d, d);
    for k in 0..d {
        let m = j - k as f64;
        jz[(k, k)] = Complex64::new(m, 0.0);
        if k > 0 {
            // ⟨m+1| J+ |m⟩
            jp[(k - 1, k)] = Complex64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * Complex64::new(0.5, 0.0);
    let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
    [jx, jy, jz]
}

/// Electron and nuclear spin operators embedded in the joint product space.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub s: [CMatrix; 3],
    pub i: [CMatrix; 3],
}

impl SpinOperators {
    pub fn new(params: &SpinSystemParams) -> Self {
        let ds = multiplicity(params.electron_spin);
        let di = multiplicity(params.nuclear_spin);
        let one_s = CMatrix::identity(ds, ds);
        let one_i = CMatrix::identity(di, di);
        let s = spin_matrices(params.electron_spin).map(|m| m.kronecker(&one_i));
        let i = spin_matrices(params.nuclear_spin).map(|m| one_s.kronecker(&m));
        Self { s, i }
    }

    pub fn fz(&self) -> CMatrix {
        &self.s[2] + &self.i[2]
    }

    pub fn f_squared(&self) -> CMatrix {
        (0..3)
            .map(|k| {
                let f = &self.s[k] + &self.i[k];
                &f * &f
            })
            .fold(
                CMatrix::zeros(self.s[0].nrows(), self.s[0].ncols()),
                |a, b| a + b,
            )
    }

    pub fn s_dot_i(&self) -> CMatrix {
        &self.s[0] * &self.i[0] + &self.s[1] * &self.i[1] + &self.s[2] * &self.i[2]
    }
}

/// H/h in Hz for a static field `b0` (tesla) along z.
pub fn build_hamiltonian(params: &SpinSystemParams, b0: f64) -> HermitianOperator {
    let ops = SpinOperators::new(params);
    hamiltonian_with(&ops, params, b0)
}

fn hamiltonian_with(ops: &SpinOperators, params: &SpinSystemParams, b0: f64) -> HermitianOperator {
    let zeeman = &ops.s[2] * Complex64::new(b0 * params.gamma_e, 0.0)
        - &ops.i[2] * Complex64::new(b0 * params.gamma_n, 0.0);
    let hyperfine = ops.s_dot_i() * Complex64::new(params.hyperfine_a, 0.0);
    HermitianOperator {
        entries: zeeman + hyperfine,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiOptions {
    /// Converged when the off-diagonal Frobenius norm drops below `tol · ‖H‖`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_sweeps: 100,
        }
    }
}

/// Eigenvalues in ascending order; column `k` of `vectors` pairs with `values[k]`.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigensystem {
    pub fn vector(&self, k: usize) -> nalgebra::DVector<Complex64> {
        self.vectors.column(k).into_owned()
    }
}

pub fn eigensystem(h: &HermitianOperator) -> Result<Eigensystem> {
    jacobi_eigen(h.entries(), JacobiOptions::default())
}

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot `a_pq` with a diagonal
/// unitary, then annihilates the (now real) pivot with a plane rotation.
pub fn jacobi_eigen(matrix: &CMatrix, opts: JacobiOptions) -> Result<Eigensystem> {
    let n = matrix.nrows();
    let mut a = matrix.clone();
    let mut v = CMatrix::identity(n, n);
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    let off_norm = |a: &CMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    // A zero matrix passes the first check.
    loop {
        let off = off_norm(&a);
        if off <= opts.tol * scale {
            break;
        }
        if sweeps == opts.max_sweeps {
            return Err(Error::NonConvergence {
                sweeps,
                off_norm: off / scale,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let b = a[(p, q)];
                let bn = b.norm();
                if bn <= f64::MIN_POSITIVE.max(1e-300 * scale) {
                    continue;
                }
                let phase = b / bn; // e^{iφ}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * bn);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U = [[c, s], [-s e^{-iφ}, c e^{-iφ}]] on (p, q)
                let u_qp = -phase.conj() * s;
                let u_qq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c + akq * u_qp;
                    a[(k, q)] = akp * s + akq * u_qq;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * u_qp;
                    v[(k, q)] = vkp * s + vkq * u_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c + aqk * u_qp.conj();
                    a[(q, k)] = apk * s + aqk * u_qq.conj();
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(Eigensystem { values, vectors })
}

/// Hyperfine state label |F, m⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FmLabel {
    pub f: i32,
    pub m: i32,
}

impl FmLabel {
    pub const fn new(f: i32, m: i32) -> Self {
        Self { f, m }
    }
}

impl std::fmt::Display for FmLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "|{},{}>", self.f, self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledLevel {
    pub index: usize,
    /// Hz, relative to the mean of all eigenvalues.
    pub energy: f64,
    pub f: i32,
    pub m: i32,
}

impl LabeledLevel {
    pub fn label(&self) -> FmLabel {
        FmLabel::new(self.f, self.m)
    }
}

/// Labeled eigenbasis at one field value. Column `k` of `vectors` is `levels[k]`.
#[derive(Debug, Clone)]
pub struct LevelStructure {
    pub b0: f64,
    pub levels: Vec<LabeledLevel>,
    pub vectors: CMatrix,
}

impl LevelStructure {
    pub fn find(&self, label: FmLabel) -> Option<&LabeledLevel> {
        self.levels.iter().find(|l| l.label() == label)
    }

    pub fn energy(&self, label: FmLabel) -> Result<f64> {
        self.find(label)
            .map(|l| l.energy)
            .ok_or(Error::MissingLevel {
                f: label.f,
                m: label.m,
            })
    }

    pub fn expectation(&self, op: &CMatrix, k: usize) -> Complex64 {
        let v = self.vectors.column(k);
        (v.adjoint() * op * v)[(0, 0)]
    }
}

fn matrix_element(op: &CMatrix, bra: &CMatrix, ket: &CMatrix) -> Complex64 {
    (bra.adjoint() * op * ket)[(0, 0)]
}

/// Assign |F, m⟩ labels to an eigensystem of `h`.
///
/// Degenerate clusters are first rotated so F_z is diagonal inside them. m is
/// read from ⟨F_z⟩. At zero field F is read from ⟨F²⟩; otherwise it is the
/// energy rank within the m sector (lower state → F = I − 1/2).
pub fn label_levels(
    h: &HermitianOperator,
    eig: &Eigensystem,
    ops: &SpinOperators,
    params: &SpinSystemParams,
    b0: f64,
) -> Result<LevelStructure> {
    let n = eig.values.len();
    let fz = ops.fz();
    let scale = eig
        .values
        .iter()
        .fold(0.0f64, |m, e| m.max(e.abs()))
        .max(f64::MIN_POSITIVE);
    let cluster_tol = 1e-8 * scale;

    let mut vectors = eig.vectors.clone();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig.values[end] - eig.values[end - 1] <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            let block = vectors.columns(start, end - start).into_owned();
            let fz_block = block.adjoint() * &fz * &block;
            let sub = jacobi_eigen(&fz_block, JacobiOptions::default())?;
            let rotated = &block * &sub.vectors;
            vectors.columns_mut(start, end - start).copy_from(&rotated);
        }
        start = end;
    }

    let energies: Vec<f64> = (0..n)
        .map(|k| {
            matrix_element(
                h.entries(),
                &vectors.columns(k, 1).into_owned(),
                &vectors.columns(k, 1).into_owned(),
            )
            .re
        })
        .collect();
    let mean = energies.iter().sum::<f64>() / n as f64;

    let mut ms = Vec::with_capacity(n);
    for k in 0..n {
        let col = vectors.columns(k, 1).into_owned();
        let mz = matrix_element(&fz, &col, &col).re;
        let m = mz.round();
        if (mz - m).abs() > 1e-6 {
            return Err(Error::LabelAmbiguity(format!(
                "<Fz> = {mz} is not an integer for eigenvalue {k}"
            )));
        }
        ms.push(m as i32);
    }

    let (f_low, f_high) = params.manifolds();
    let mut fs = vec![0i32; n];
    if b0 == 0.0 {
        let f2 = ops.f_squared();
        for (k, fk) in fs.iter_mut().enumerate() {
            let col = vectors.columns(k, 1).into_owned();
            let f2k = matrix_element(&f2, &col, &col).re;
            let f = (-1.0 + (1.0 + 4.0 * f2k).sqrt()) / 2.0;
            let fr = f.round();
            if (f - fr).abs() > 1e-6 {
                return Err(Error::LabelAmbiguity(format!(
                    "<F^2> = {f2k} at zero field"
                )));
            }
            *fk = fr as i32;
        }
    } else {
        let mut sectors: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (k, &m) in ms.iter().enumerate() {
            sectors.entry(m).or_default().push(k);
        }
        for (&m, idx) in sectors.iter_mut() {
            idx.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
            let expected = if m.abs() <= f_low {
                2
            } else if m.abs() == f_high {
                1
            } else {
                0
            };
            if idx.len() != expected {
                return Err(Error::LabelAmbiguity(format!(
                    "m = {m} sector holds {} states, expected {expected}",
                    idx.len()
                )));
            }
            if expected == 2 {
                if (energies[idx[1]] - energies[idx[0]]).abs() <= 1e-12 * scale {
                    return Err(Error::LabelAmbiguity(format!(
                        "m = {m} sector is degenerate at B0 = {b0} T"
                    )));
                }
                fs[idx[0]] = f_low;
                fs[idx[1]] = f_high;
            } else {
                fs[idx[0]] = f_high;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
    let levels: Vec<LabeledLevel> = order
        .iter()
        .enumerate()
        .map(|(index, &k)| LabeledLevel {
            index,
            energy: energies[k] - mean,
            f: fs[k],
            m: ms[k],
        })
        .collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);

    let mut seen: Vec<FmLabel> = levels.iter().map(|l| l.label()).collect();
    seen.sort();
    seen.dedup();
    if seen.len() != n {
        return Err(Error::LabelAmbiguity("duplicate (F, m) labels".into()));
    }
    Ok(LevelStructure {
        b0,
        levels,
        vectors,
    })
}

/// Electric-dipole-free magnetic transition between two labeled levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub lower: FmLabel,
    pub upper: FmLabel,
    /// Hz, always positive.
    pub frequency: f64,
    /// |⟨lower|S_x|upper⟩|
    pub sx_element: f64,
    /// |⟨lower|S_y|upper⟩|
    pub sy_element: f64,
}

impl Transition {
    /// lower.m + upper.m; the two members of a quasi-degenerate pair share it.
    pub fn m_sum(&self) -> i32 {
        self.lower.m + self.upper.m
    }
}

/// All ΔF·Δm = ±1 transitions whose S_x or S_y element exceeds `floor`,
/// ordered by frequency.
pub fn transition_table(
    structure: &LevelStructure,
    ops: &SpinOperators,
    floor: f64,
) -> Vec<Transition> {
    let n = structure.levels.len();
    let cols: Vec<CMatrix> = (0..n)
        .map(|k| structure.vectors.columns(k, 1).into_owned())
        .collect();
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let la = structure.levels[a];
            let lb = structure.levels[b];
            if lb.f != la.f + 1 || (la.m - lb.m).abs() != 1 {
                continue;
            }
            let sx = matrix_element(&ops.s[0], &cols[a], &cols[b]).norm();
            let sy = matrix_element(&ops.s[1], &cols[a], &cols[b]).norm();
            if sx.max(sy) < floor {
                continue;
            }
            let (lower, upper) = if lb.energy >= la.energy {
                (la, lb)
            } else {
                (lb, la)
            };
            out.push(Transition {
                lower: lower.label(),
                upper: upper.label(),
                frequency: upper.energy - lower.energy,
                sx_element: sx,
                sy_element: sy,
            });
        }
    }
    out.sort_by(|x, y| x.frequency.total_cmp(&y.frequency));
    out
}

/// Donor model with cached spin operators.
#[derive(Debug, Clone)]
pub struct Donor {
    pub params: SpinSystemParams,
    pub ops: SpinOperators,
}

impl Donor {
    pub fn new(params: SpinSystemParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            ops: SpinOperators::new(&params),
            params,
        })
    }

    pub fn bismuth() -> Self {
        Self::new(SpinSystemParams::bismuth()).expect("bismuth parameters are valid")
    }

    pub fn hamiltonian(&self, b0: f64) -> HermitianOperator {
        hamiltonian_with(&self.ops, &self.params, b0)
    }

    pub fn levels(&self, b0: f64) -> Result<LevelStructure> {
        let h = self.hamiltonian(b0);
        let eig = eigensystem(&h)?;
        label_levels(&h, &eig, &self.ops, &self.params, b0)
    }

    pub fn transitions(&self, b0: f64) -> Result<Vec<Transition>> {
        Ok(transition_table(
            &self.levels(b0)?,
            &self.ops,
            MATRIX_ELEMENT_FLOOR,
        ))
    }
}

/// In-manifold splitting E|F, m+1⟩ − E|F, m⟩ in Hz.
pub fn hyperfine_splitting(levels: &[LabeledLevel], f: i32, m: i32) -> Result<f64> {
    let find = |m: i32| {
        levels
            .iter()
            .find(|l| l.f == f && l.m == m)
            .map(|l| l.energy)
            .ok_or(Error::MissingLevel { f, m })
    };
    Ok(find(m + 1)? - find(m)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub b0: f64,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub lower: FmLabel,
    pub upper: FmLabel,
    /// Field (tesla) where the branch crosses the target frequency.
    pub b0: f64,
}

/// Crossings belonging to one quasi-degenerate family (same `m_sum`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceGroup {
    pub m_sum: i32,
    /// Mean crossing field, tesla.
    pub b0: f64,
    pub crossings: Vec<Crossing>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSweep {
    pub omega0: f64,
    pub points: Vec<SweepPoint>,
    pub resonances: Vec<ResonanceGroup>,
    /// Smallest eigenvector overlap used when tracking levels across the grid.
    pub min_overlap: f64,
    /// Levels whose tracked label differed from the independently assigned one.
    pub label_mismatches: usize,
}

/// Transition frequencies over a monotone field grid and the fields where each
/// branch crosses `omega0` (Hz).
///
/// Levels are tracked between neighbouring grid points by greedy maximum
/// eigenvector overlap; labels at the first grid point come from
/// [`label_levels`].
pub fn spectrum_vs_field(
    params: &SpinSystemParams,
    b0_grid: &[f64],
    omega0: f64,
) -> Result<FieldSweep> {
    if b0_grid.is_empty() {
        return Err(Error::invalid("empty field grid"));
    }
    if b0_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("field grid must be strictly increasing"));
    }
    let donor = Donor::new(*params)?;
    let structures: Vec<LevelStructure> = par::map(b0_grid, |&b| donor.levels(b))
        .into_iter()
        .collect::<Result<_>>()?;

    let (structures, min_overlap, label_mismatches) = track_levels(structures);

    let points: Vec<SweepPoint> = par::map(&structures, |s| SweepPoint {
        b0: s.b0,
        transitions: transition_table(s, &donor.ops, MATRIX_ELEMENT_FLOOR),
    });

    let resonances = find_resonances(&points, omega0);
    Ok(FieldSweep {
        omega0,
        points,
        resonances,
        min_overlap,
        label_mismatches,
    })
}

fn track_levels(mut structures: Vec<LevelStructure>) -> (Vec<LevelStructure>, f64, usize) {
    let mut min_overlap = 1.0f64;
    let mut mismatches = 0;
    for i in 1..structures.len() {
        let (head, tail) = structures.split_at_mut(i);
        let prev = &head[i - 1];
        let cur = &mut tail[0];
        let n = cur.levels.len();
        let overlaps = prev.vectors.adjoint() * &cur.vectors;
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                pairs.push((overlaps[(a, b)].norm(), a, b));
            }
        }
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut prev_used = vec![false; n];
        let mut assigned: Vec<Option<(FmLabel, f64)>> = vec![None; n];
        for (ov, a, b) in pairs {
            if prev_used[a] || assigned[b].is_some() {
                continue;
            }
            prev_used[a] = true;
            assigned[b] = Some((prev.levels[a].label(), ov));
        }
        for (b, slot) in assigned.into_iter().enumerate() {
            let (label, ov) = slot.expect("greedy assignment covers every level");
            min_overlap = min_overlap.min(ov);
            if cur.levels[b].label() != label {
                mismatches += 1;
                cur.levels[b].f = label.f;
                cur.levels[b].m = label.m;
            }
        }
    }
    (structures, min_overlap, mismatches)
}

fn find_resonances(points: &[SweepPoint], omega0: f64) -> Vec<ResonanceGroup> {
    let mut branches: BTreeMap<(FmLabel, FmLabel), Vec<(f64, f64)>> = BTreeMap::new();
    for p in points {
        for t in &p.transitions {
            branches
                .entry((t.lower, t.upper))
                .or_default()
                .push((p.b0, t.frequency));
        }
    }
    let mut groups: BTreeMap<i32, Vec<Crossing>> = BTreeMap::new();
    for ((lower, upper), samples) in &branches {
        for w in samples.windows(2) {
            let (b_a, f_a) = w[0];
            let (b_b, f_b) = w[1];
            let d_a = f_a - omega0;
            let d_b = f_b - omega0;
            let crosses = (d_a < 0.0 && d_b >= 0.0) || (d_a > 0.0 && d_b <= 0.0);
            if !crosses {
                continue;
            }
            let b0 = b_a + (omega0 - f_a) / (f_b - f_a) * (b_b - b_a);
            groups.entry(lower.m + upper.m).or_default().push(Crossing {
                lower: *lower,
                upper: *upper,
                b0,
            });
        }
    }
    let mut out: Vec<ResonanceGroup> = groups
        .into_iter()
        .map(|(m_sum, mut crossings)| {
            crossings.sort_by(|a, b| a.b0.total_cmp(&b.b0));
            let b0 = crossings.iter().map(|c| c.b0).sum::<f64>() / crossings.len() as f64;
            ResonanceGroup {
                m_sum,
                b0,
                crossings,
            }
        })
        .collect();
    out.sort_by(|a, b| a.b0.total_cmp(&b.b0));
    out
}

/// Uniform grid from `min` to `max` inclusive with spacing at most `step`.
pub fn field_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max > min) {
        return Err(Error::invalid("field grid needs max > min and step > 0"));
    }
    let n = ((max - min) / step - 1e-9).ceil() as usize;
    Ok((0..=n)
        .map(|k| min + (max - min) * k as f64 / n as f64)
        .collect())
}
