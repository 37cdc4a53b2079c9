//! Sparse LU factorisation of a simplex basis with product-form updates.
//!
//! Factorisation pivots column and row singletons first (no fill, no
//! arithmetic), then factorises the remaining nucleus densely with partial
//! pivoting. Basis changes are appended as eta columns until the next
//! refactorisation.

/// Column of the basis matrix given as `(row, value)` pairs.
pub type SparseCol = Vec<(usize, f64)>;

const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    others: Vec<(usize, f64)>,
}

/// `P·B·Q = L·U` stored in pivot order, plus an eta file.
#[derive(Debug, Clone, Default)]
pub struct LuFactors {
    m: usize,
    /// Row pivoted at step `t`.
    prow: Vec<usize>,
    /// Basis position (column) pivoted at step `t`.
    pcol: Vec<usize>,
    /// Elimination multipliers of step `t`, indexed by original row.
    lcols: Vec<Vec<(usize, f64)>>,
    /// Off-diagonal entries of U row `t`, indexed by basis position.
    urows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
    etas: Vec<Eta>,
    eta_nnz: usize,
}

/// Result of a factorisation attempt on a possibly singular basis.
#[derive(Debug)]
pub struct Singular {
    /// Basis positions that could not be pivoted.
    pub positions: Vec<usize>,
    /// Rows left without a pivot, same length as `positions`.
    pub rows: Vec<usize>,
}

impl LuFactors {
    /// Factorises the `m × m` matrix whose columns are `cols`.
    pub fn factorize(m: usize, cols: &[SparseCol]) -> Result<Self, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut f = LuFactors {
            m,
            prow: Vec::with_capacity(m),
            pcol: Vec::with_capacity(m),
            lcols: Vec::with_capacity(m),
            urows: Vec::with_capacity(m),
            diag: Vec::with_capacity(m),
            etas: Vec::new(),
            eta_nnz: 0,
        };

        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut col_count: Vec<usize> = cols.iter().map(|c| c.len()).collect();
        let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (c, col) in cols.iter().enumerate() {
            for &(r, _) in col {
                row_cols[r].push(c);
            }
        }
        let mut row_count: Vec<usize> = row_cols.iter().map(|r| r.len()).collect();

        // Column singletons: no L multipliers, U row = rest of the pivot row.
        let mut stack: Vec<usize> = (0..m).filter(|&c| col_count[c] == 1).collect();
        while let Some(c) = stack.pop() {
            if !col_active[c] || col_count[c] != 1 {
                continue;
            }
            let Some(&(r, v)) = cols[c].iter().find(|&&(r, _)| row_active[r]) else {
                continue;
            };
            if v.abs() < SINGULAR_TOL {
                continue;
            }
            let mut urow = Vec::new();
            for &j in &row_cols[r] {
                if j != c && col_active[j] {
                    let a = cols[j].iter().find(|&&(rr, _)| rr == r).map(|e| e.1).unwrap_or(0.0);
                    if a != 0.0 {
                        urow.push((j, a));
                    }
                    col_count[j] -= 1;
                    if col_count[j] == 1 {
                        stack.push(j);
                    }
                }
            }
            row_active[r] = false;
            col_active[c] = false;
            for &(rr, _) in &cols[c] {
                if row_active[rr] {
                    row_count[rr] -= 1;
                }
            }
            f.push_pivot(r, c, v, Vec::new(), urow);
        }

        // Row singletons: no U entries, L column = rest of the pivot column.
        let mut stack: Vec<usize> = (0..m).filter(|&r| row_active[r] && row_count[r] == 1).collect();
        while let Some(r) = stack.pop() {
            if !row_active[r] || row_count[r] != 1 {
                continue;
            }
            let Some(&c) = row_cols[r].iter().find(|&&c| col_active[c]) else {
                continue;
            };
            let v = cols[c].iter().find(|&&(rr, _)| rr == r).map(|e| e.1).unwrap_or(0.0);
            if v.abs() < SINGULAR_TOL {
                continue;
            }
            let mut lcol = Vec::new();
            for &(i, a) in &cols[c] {
                if i != r && row_active[i] {
                    lcol.push((i, a / v));
                    row_count[i] -= 1;
                    if row_count[i] == 1 {
                        stack.push(i);
                    }
                }
            }
            row_active[r] = false;
            col_active[c] = false;
            for &j in &row_cols[r] {
                if col_active[j] {
                    col_count[j] -= 1;
                }
            }
            f.push_pivot(r, c, v, lcol, Vec::new());
        }

        // Dense nucleus.
        let nrows: Vec<usize> = (0..m).filter(|&r| row_active[r]).collect();
        let ncols: Vec<usize> = (0..m).filter(|&c| col_active[c]).collect();
        debug_assert_eq!(nrows.len(), ncols.len());
        let k = nrows.len();
        if k > 0 {
            let mut local_row = vec![usize::MAX; m];
            for (i, &r) in nrows.iter().enumerate() {
                local_row[r] = i;
            }
            // Dense storage, column-major: a[j*k + i].
            let mut a = vec![0.0; k * k];
            for (j, &c) in ncols.iter().enumerate() {
                for &(r, v) in &cols[c] {
                    if local_row[r] != usize::MAX {
                        a[j * k + local_row[r]] = v;
                    }
                }
            }
            let mut row_done = vec![false; k];
            let mut col_done = vec![false; k];
            let mut failed_cols = Vec::new();
            for j in 0..k {
                // Partial pivoting within column j.
                let mut best = None;
                let mut best_abs = SINGULAR_TOL;
                for i in 0..k {
                    if !row_done[i] {
                        let v = a[j * k + i].abs();
                        if v > best_abs {
                            best_abs = v;
                            best = Some(i);
                        }
                    }
                }
                let Some(p) = best else {
                    failed_cols.push(j);
                    continue;
                };
                let pv = a[j * k + p];
                let mut lcol = Vec::new();
                for i in 0..k {
                    if !row_done[i] && i != p {
                        let l = a[j * k + i] / pv;
                        if l != 0.0 {
                            lcol.push((i, l));
                        }
                    }
                }
                let mut urow = Vec::new();
                for jj in (j + 1)..k {
                    let u = a[jj * k + p];
                    if u != 0.0 {
                        urow.push((ncols[jj], u));
                        for &(i, l) in &lcol {
                            a[jj * k + i] -= l * u;
                        }
                    }
                }
                row_done[p] = true;
                col_done[j] = true;
                let lcol = lcol.into_iter().map(|(i, l)| (nrows[i], l)).collect();
                f.push_pivot(nrows[p], ncols[j], pv, lcol, urow);
            }
            if !failed_cols.is_empty() {
                let rows = (0..k).filter(|&i| !row_done[i]).map(|i| nrows[i]).collect();
                let positions = failed_cols.into_iter().map(|j| ncols[j]).collect();
                return Err(Singular { positions, rows });
            }
            // Nucleus U rows may reference columns that failed; none did here.
            let _ = col_done;
        }
        Ok(f)
    }

    fn push_pivot(&mut self, r: usize, c: usize, v: f64, lcol: Vec<(usize, f64)>, urow: Vec<(usize, f64)>) {
        self.prow.push(r);
        self.pcol.push(c);
        self.diag.push(v);
        self.lcols.push(lcol);
        self.urows.push(urow);
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    pub fn eta_nnz(&self) -> usize {
        self.eta_nnz
    }

    /// Solves `B x = b` in place; `b` is indexed by row on entry and by
    /// basis position on exit.
    pub fn ftran(&self, b: &mut [f64]) {
        let m = self.m;
        for t in 0..m {
            let br = b[self.prow[t]];
            if br != 0.0 {
                for &(i, l) in &self.lcols[t] {
                    b[i] -= l * br;
                }
            }
        }
        let mut x = vec![0.0; m];
        for t in (0..m).rev() {
            let mut s = b[self.prow[t]];
            for &(c, u) in &self.urows[t] {
                s -= u * x[c];
            }
            x[self.pcol[t]] = s / self.diag[t];
        }
        for e in &self.etas {
            let xp = x[e.pos] / e.pivot;
            x[e.pos] = xp;
            if xp != 0.0 {
                for &(i, a) in &e.others {
                    x[i] -= a * xp;
                }
            }
        }
        b.copy_from_slice(&x);
    }

    /// Solves `Bᵀ y = d` in place; `d` is indexed by basis position on entry
    /// and by row on exit.
    pub fn btran(&self, d: &mut [f64]) {
        let m = self.m;
        for e in self.etas.iter().rev() {
            let mut s = d[e.pos];
            for &(i, a) in &e.others {
                s -= a * d[i];
            }
            d[e.pos] = s / e.pivot;
        }
        let mut w = vec![0.0; m];
        for t in 0..m {
            let wt = d[self.pcol[t]] / self.diag[t];
            w[self.prow[t]] = wt;
            if wt != 0.0 {
                for &(c, u) in &self.urows[t] {
                    d[c] -= u * wt;
                }
            }
        }
        for t in (0..m).rev() {
            let r = self.prow[t];
            let mut s = w[r];
            for &(i, l) in &self.lcols[t] {
                s -= l * w[i];
            }
            w[r] = s;
        }
        d.copy_from_slice(&w);
    }

    /// Records the replacement of basis column `pos` by a column whose
    /// FTRAN image is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let pivot = alpha[pos];
        let others: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a.abs() > 1e-14)
            .map(|(i, &a)| (i, a))
            .collect();
        self.eta_nnz += others.len() + 1;
        self.etas.push(Eta { pos, pivot, others });
    }
}
