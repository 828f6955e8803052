//! Ulam discretisation of transfer operators and the factorised coupled operator
//! `𝓛_{T∘Φ_g} = 𝓛_T ∘ 𝓛_{Φ_g}`.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::anosov::{MapSpec, TorusMap};
use crate::coupling::{CouplingField, CouplingSpec, MeasureView};
use crate::error::{Error, Result};
use crate::par;
use crate::torus::{check_resolution, TorusDensity};
use crate::trig::LatticeTables;

/// Sub-cells per cell axis whose images are clipped against the grid.
pub const DEFAULT_QUADRATURE: usize = 1;

/// Sub-cells per axis for the near-identity `Φ` stage.
const PHI_SUBDIVISION: usize = 1;

/// Relative weight below which a clipped sliver is dropped.
const SLIVER: f64 = 1e-13;

/// Column-stochastic matrix `P[j, i]` = fraction of cell `i` carried into cell `j`,
/// stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamOperator {
    n: usize,
    quadrature: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<f64>,
}

/// Merges `(target, area)` pieces into weights that sum to exactly 1.
fn normalize_column(mut pieces: Vec<(u32, f64)>) -> Vec<(u32, f64)> {
    pieces.sort_unstable_by_key(|e| e.0);
    let mut col: Vec<(u32, f64)> = Vec::with_capacity(pieces.len());
    for (t, a) in pieces {
        match col.last_mut() {
            Some((last, w)) if *last == t => *w += a,
            _ => col.push((t, a)),
        }
    }
    let total: f64 = col.iter().map(|e| e.1).sum();
    col.retain(|e| e.1 > SLIVER * total);
    let total: f64 = col.iter().map(|e| e.1).sum();
    for e in &mut col {
        e.1 /= total;
    }
    exact_unit_sum(&mut col);
    col
}

/// Adjusts weights by a few ulps until the in-order sum is exactly 1.
fn exact_unit_sum(col: &mut [(u32, f64)]) {
    let sum = |c: &[(u32, f64)]| c.iter().map(|e| e.1).sum::<f64>();
    if sum(col) == 1.0 {
        return;
    }
    // with the prefix in [½, 1] the complement is exact (Sterbenz)
    if let Some((last, head)) = col.split_last_mut() {
        let prefix: f64 = head.iter().map(|e| e.1).sum();
        if (0.5..1.0).contains(&prefix) {
            last.1 = 1.0 - prefix;
            return;
        }
    }
    let mut order: Vec<usize> = (0..col.len()).collect();
    order.sort_by(|&a, &b| col[b].1.total_cmp(&col[a].1));
    for &i in &order {
        let saved = col[i].1;
        let others: f64 = col.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, e)| e.1).sum();
        col[i].1 = 1.0 - others;
        for _ in 0..32 {
            let s = sum(col);
            if s == 1.0 {
                return;
            }
            col[i].1 = if s > 1.0 { next_down(col[i].1) } else { next_up(col[i].1) };
        }
        col[i].1 = saved;
    }
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

fn next_down(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

/// Sutherland–Hodgman against `p[axis] ≥ bound` (or `≤` when `upper`).
fn clip(poly: &[[f64; 2]], axis: usize, bound: f64, upper: bool, out: &mut Vec<[f64; 2]>) {
    out.clear();
    let inside = |p: &[f64; 2]| if upper { p[axis] <= bound } else { p[axis] >= bound };
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ia, ib) = (inside(&a), inside(&b));
        if ia {
            out.push(a);
        }
        if ia != ib {
            let t = (bound - a[axis]) / (b[axis] - a[axis]);
            let mut p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            p[axis] = bound;
            out.push(p);
        }
    }
}

fn area(poly: &[[f64; 2]]) -> f64 {
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * acc.abs()
}

fn extent(poly: &[[f64; 2]], axis: usize) -> (i64, i64) {
    let lo = poly.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
    let hi = poly.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
    (lo.floor() as i64, hi.ceil() as i64)
}

/// Scratch buffers for cutting polygons (in grid units) along cell boundaries.
#[derive(Default)]
struct Cutter {
    tmp: Vec<[f64; 2]>,
    strip: Vec<[f64; 2]>,
    piece: Vec<[f64; 2]>,
}

impl Cutter {
    fn deposit(&mut self, quad: &[[f64; 2]; 4], n: usize, acc: &mut Vec<(u32, f64)>) {
        let cell = |kx: i64, ky: i64| (ky.rem_euclid(n as i64) as usize * n + kx.rem_euclid(n as i64) as usize) as u32;
        let (x0, x1) = extent(quad, 0);
        let (y0, y1) = extent(quad, 1);
        if x1 - x0 == 1 && y1 - y0 == 1 {
            acc.push((cell(x0, y0), area(quad)));
            return;
        }
        for kx in x0..x1 {
            clip(quad, 0, kx as f64, false, &mut self.tmp);
            clip(&self.tmp, 0, (kx + 1) as f64, true, &mut self.strip);
            if self.strip.len() < 3 {
                continue;
            }
            let (sy0, sy1) = extent(&self.strip, 1);
            for ky in sy0..sy1 {
                clip(&self.strip, 1, ky as f64, false, &mut self.tmp);
                clip(&self.tmp, 1, (ky + 1) as f64, true, &mut self.piece);
                let a = area(&self.piece);
                if a > 0.0 {
                    acc.push((cell(kx, ky), a));
                }
            }
        }
    }
}

/// Exact-area Ulam matrix from lifted sub-cell corner images.
///
/// `corners[b·(m+1) + a]` is the image of `(a/m, b/m)` scaled by `n`, `m = n·s`.
/// Each sub-cell image is the quadrilateral through its four mapped corners;
/// neighbouring quadrilaterals share edges, so images tile the torus.
fn assemble(n: usize, s: usize, corners: &[[f64; 2]]) -> UlamOperator {
    let stride = n * s + 1;
    let columns = par::map_indexed(n * n, |i| {
        let (r, c) = (i / n, i % n);
        let mut cutter = Cutter::default();
        let mut pieces = Vec::with_capacity(4 * s * s);
        for b in 0..s {
            for a in 0..s {
                let (la, lb) = (c * s + a, r * s + b);
                let at = |x: usize, y: usize| corners[y * stride + x];
                let quad = [at(la, lb), at(la + 1, lb), at(la + 1, lb + 1), at(la, lb + 1)];
                cutter.deposit(&quad, n, &mut pieces);
            }
        }
        normalize_column(pieces)
    });
    UlamOperator::from_columns(n, s, &columns)
}

impl UlamOperator {
    /// Assembles the operator from per-column entries (column `i` at index `i`).
    fn from_columns(n: usize, quadrature: usize, columns: &[Vec<(u32, f64)>]) -> Self {
        let size = n * n;
        let mut counts = vec![0usize; size + 1];
        for col in columns {
            for &(r, _) in col {
                counts[r as usize + 1] += 1;
            }
        }
        for i in 0..size {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let nnz = row_ptr[size];
        let mut cols = vec![0u32; nnz];
        let mut values = vec![0.0; nnz];
        let mut fill = counts;
        for (i, col) in columns.iter().enumerate() {
            for &(r, w) in col {
                let slot = fill[r as usize];
                cols[slot] = i as u32;
                values[slot] = w;
                fill[r as usize] += 1;
            }
        }
        Self { n, quadrature, row_ptr, cols, values }
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn quadrature(&self) -> usize {
        self.quadrature
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[row], self.row_ptr[row + 1]);
        match self.cols[lo..hi].binary_search(&(col as u32)) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Entries of every column in increasing row order.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.n * self.n];
        for r in 0..self.n * self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.cols[k] as usize].push((r, self.values[k]));
            }
        }
        out
    }

    /// Column sums accumulated in increasing row order.
    pub fn column_sums(&self) -> Vec<f64> {
        self.columns().iter().map(|c| c.iter().map(|e| e.1).sum()).collect()
    }

    /// `P·x` on raw cell values.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        par::fill_indexed(&mut out, |r| {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k] as usize];
            }
            acc
        });
        out
    }

    /// Coordinate-format dump, one `row col value` triple per line.
    pub fn to_coordinate_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "% n={} quadrature={} nnz={}", self.n, self.quadrature, self.nnz());
        for r in 0..self.n * self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let _ = writeln!(s, "{} {} {:?}", r, self.cols[k], self.values[k]);
            }
        }
        s
    }
}

/// Ulam matrix of `map` at resolution `n`, clipping the images of `s×s`
/// sub-cells per cell.
pub fn build_ulam(map: &dyn TorusMap, n: usize, s: usize) -> Result<UlamOperator> {
    check_resolution(n)?;
    if s == 0 {
        return Err(Error::InvalidParameter("quadrature order must be ≥ 1".into()));
    }
    let m = n * s;
    let scale = n as f64;
    let corners = par::map_indexed((m + 1) * (m + 1), |k| {
        let (b, a) = (k / (m + 1), k % (m + 1));
        let y = map.lift([a as f64 / m as f64, b as f64 / m as f64]);
        [y[0] * scale, y[1] * scale]
    });
    Ok(assemble(n, s, &corners))
}

fn check_same(n: usize, h: &TorusDensity) -> Result<()> {
    if h.resolution() != n {
        Err(Error::ResolutionMismatch { left: n, right: h.resolution() })
    } else {
        Ok(())
    }
}

/// `𝓛_S h` for the discretised operator.
pub fn push_density(p: &UlamOperator, h: &TorusDensity) -> Result<TorusDensity> {
    check_same(p.n, h)?;
    Ok(TorusDensity::from_raw(p.n, p.matvec(h.cells())))
}

/// Ulam push-forward under a near-identity `Φ`; every entry couples cells at
/// most `bandwidth` apart.
#[derive(Debug, Clone)]
pub struct PhiStage {
    op: UlamOperator,
    bandwidth: usize,
}

impl PhiStage {
    /// `tables` must be corner tables for `n` nodes covering the field's modes.
    pub fn build(field: &CouplingField, n: usize, tables: &LatticeTables) -> Result<Self> {
        let m = n * PHI_SUBDIVISION;
        if tables.nodes() != m || tables.kmax() < field.g().max_mode() {
            return Err(Error::InvalidParameter("lattice tables do not match the Φ stage".into()));
        }
        let bandwidth = (field.displacement_bound() * n as f64).ceil() as usize + 1;
        let eps = field.eps();
        let g = field.g();
        let scale = n as f64;
        let corners = par::map_indexed((m + 1) * (m + 1), |k| {
            let (b, a) = (k / (m + 1), k % (m + 1));
            let d = g.eval_lattice(tables, a % m, b % m);
            [(a as f64 / m as f64 + eps * d[0]) * scale, (b as f64 / m as f64 + eps * d[1]) * scale]
        });
        Ok(Self { op: assemble(n, PHI_SUBDIVISION, &corners), bandwidth })
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Largest cyclic cell distance between a source and a target.
    pub fn max_offset(&self) -> usize {
        let n = self.op.n;
        let dist = |a: usize, b: usize| {
            let d = a.abs_diff(b);
            d.min(n - d)
        };
        let mut worst = 0;
        for r in 0..n * n {
            for k in self.op.row_ptr[r]..self.op.row_ptr[r + 1] {
                let c = self.op.cols[k] as usize;
                worst = worst.max(dist(r % n, c % n)).max(dist(r / n, c / n));
            }
        }
        worst
    }

    pub fn operator(&self) -> &UlamOperator {
        &self.op
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        self.op.matvec(h)
    }
}

/// Cached pieces of the coupled operator: the `T` stage matrix and the lattice
/// tables used to rebuild the `Φ` stage for each driving measure.
#[derive(Debug, Clone)]
pub struct CoupledTransfer {
    base: Arc<UlamOperator>,
    coupling: CouplingSpec,
    tables: Option<LatticeTables>,
}

impl CoupledTransfer {
    pub fn new(map: &MapSpec, coupling: CouplingSpec, n: usize, s: usize) -> Result<Self> {
        let base = build_ulam(map, n, s)?;
        Ok(Self::from_base(Arc::new(base), coupling))
    }

    pub fn from_base(base: Arc<UlamOperator>, coupling: CouplingSpec) -> Self {
        let tables = (!coupling.is_identity())
            .then(|| LatticeTables::corners(base.n * PHI_SUBDIVISION, coupling.kernel().max_mode()));
        Self { base, coupling, tables }
    }

    pub fn base(&self) -> &UlamOperator {
        &self.base
    }

    /// Same cached `T` stage, different coupling.
    pub fn with_coupling(&self, coupling: CouplingSpec) -> Self {
        Self::from_base(Arc::clone(&self.base), coupling)
    }

    pub fn coupling(&self) -> &CouplingSpec {
        &self.coupling
    }

    pub fn resolution(&self) -> usize {
        self.base.n
    }

    pub fn plan<'a>(&'a self, driving: MeasureView<'a>) -> CoupledOperatorPlan<'a> {
        CoupledOperatorPlan { transfer: self, driving }
    }

    /// The `Φ` stage for a driving measure, or `None` when `Φ = Id`.
    pub fn phi_stage(&self, driving: &MeasureView) -> Result<Option<PhiStage>> {
        let field = self.coupling.field(driving);
        match &self.tables {
            Some(tables) if !field.is_identity() => {
                PhiStage::build(&field, self.base.n, tables).map(Some)
            }
            _ => Ok(None),
        }
    }
}

/// `𝓛_{T∘Φ_g}` for one frozen driving measure `g`.
#[derive(Debug, Clone, Copy)]
pub struct CoupledOperatorPlan<'a> {
    transfer: &'a CoupledTransfer,
    driving: MeasureView<'a>,
}

impl<'a> CoupledOperatorPlan<'a> {
    pub fn transfer(&self) -> &'a CoupledTransfer {
        self.transfer
    }

    pub fn driving(&self) -> MeasureView<'a> {
        self.driving
    }
}

/// `𝓛_T(𝓛_{Φ_g} h)`; skips the `Φ` stage entirely when it is the identity.
pub fn apply_coupled(plan: &CoupledOperatorPlan, h: &TorusDensity) -> Result<TorusDensity> {
    let t = plan.transfer;
    check_same(t.base.n, h)?;
    match t.phi_stage(&plan.driving)? {
        None => push_density(&t.base, h),
        Some(stage) => {
            let moved = stage.apply(h.cells());
            Ok(TorusDensity::from_raw(t.base.n, t.base.matvec(&moved)))
        }
    }
}

/// `𝓛_{T_{g_{k-1}}} ⋯ 𝓛_{T_{g_0}} h`, applying `plans[0]` first.
pub fn push_sequential(plans: &[CoupledOperatorPlan], h: &TorusDensity) -> Result<TorusDensity> {
    let mut cur = h.clone();
    for plan in plans {
        cur = apply_coupled(plan, &cur)?;
    }
    Ok(cur)
}
