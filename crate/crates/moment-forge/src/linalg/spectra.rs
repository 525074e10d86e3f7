//! Eigenvalue sets, disjointness checks, and eigenvector extraction.

use super::{complexify, ComplexMatrix, RealMatrix, Tolerances};
use crate::{Error, Result};
use num_complex::Complex;

/// An eigenvalue multiset, stored sorted by (real part, imaginary part) so
/// that reports and comparisons are deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<Complex<f64>>,
}

impl Spectrum {
    /// Computes the spectrum of a square real matrix.
    pub fn of(m: &RealMatrix) -> Result<Spectrum> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "spectrum requires a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        super::ensure_finite("matrix for spectrum", m)?;
        let eigs = m.complex_eigenvalues();
        Ok(Spectrum::from_eigenvalues(eigs.iter().copied().collect()))
    }

    /// Wraps an explicit eigenvalue list (sorted internally).
    pub fn from_eigenvalues(mut eigenvalues: Vec<Complex<f64>>) -> Spectrum {
        eigenvalues.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
        });
        Spectrum { eigenvalues }
    }

    /// The eigenvalues, sorted by (re, im).
    pub fn eigenvalues(&self) -> &[Complex<f64>] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Largest modulus over the spectrum (0 for an empty spectrum).
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest real part over the spectrum (−∞ for an empty spectrum).
    pub fn abscissa(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when every eigenvalue satisfies `Re(λ) < −margin`.
    pub fn is_hurwitz(&self, margin: f64) -> bool {
        self.abscissa() < -margin
    }

    /// Groups eigenvalues into clusters whose members are within
    /// `gap_abs` of a cluster representative; returns (representative,
    /// multiplicity) pairs. The representative is the cluster mean.
    pub fn clustered(&self, gap_abs: f64) -> Vec<(Complex<f64>, usize)> {
        let mut clusters: Vec<(Complex<f64>, usize)> = Vec::new();
        for &z in &self.eigenvalues {
            match clusters
                .iter_mut()
                .find(|(rep, _)| (*rep - z).norm() <= gap_abs)
            {
                Some((rep, count)) => {
                    // running mean keeps the representative centered
                    *rep = (*rep * (*count as f64) + z) / (*count as f64 + 1.0);
                    *count += 1;
                }
                None => clusters.push((z, 1)),
            }
        }
        clusters
    }

    /// Greedy multiset distance: pairs each eigenvalue of `self` with the
    /// nearest unused eigenvalue of `other` and returns the largest pairing
    /// distance. Infinite when the sizes differ.
    pub fn multiset_distance(&self, other: &Spectrum) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        let mut used = vec![false; other.len()];
        let mut worst: f64 = 0.0;
        for &z in &self.eigenvalues {
            let mut best = f64::INFINITY;
            let mut best_j = usize::MAX;
            for (j, &w) in other.eigenvalues.iter().enumerate() {
                if !used[j] {
                    let d = (z - w).norm();
                    if d < best {
                        best = d;
                        best_j = j;
                    }
                }
            }
            if best_j == usize::MAX {
                return f64::INFINITY;
            }
            used[best_j] = true;
            worst = worst.max(best);
        }
        worst
    }

    /// Concatenates two spectra into one multiset.
    pub fn union(&self, other: &Spectrum) -> Spectrum {
        let mut all = self.eigenvalues.clone();
        all.extend_from_slice(&other.eigenvalues);
        Spectrum::from_eigenvalues(all)
    }
}

/// Decides whether σ(A) and σ(S) are disjoint under the tolerance policy.
///
/// Returns `(disjoint, min_gap)` where `min_gap` is the smallest pairwise
/// eigenvalue distance. The threshold is
/// `tol.spectral_gap · (1 + max(ρ(A), ρ(S)))`.
pub fn spectra_disjoint(a: &RealMatrix, s: &RealMatrix, tol: &Tolerances) -> Result<(bool, f64)> {
    let sa = Spectrum::of(a)?;
    let ss = Spectrum::of(s)?;
    let scale = 1.0 + sa.spectral_radius().max(ss.spectral_radius());
    let threshold = tol.spectral_gap * scale;
    let mut min_gap = f64::INFINITY;
    for &za in sa.eigenvalues() {
        for &zs in ss.eigenvalues() {
            min_gap = min_gap.min((za - zs).norm());
        }
    }
    Ok((min_gap > threshold, min_gap))
}

/// Same as [`spectra_disjoint`] but errors with [`Error::SpectraOverlap`]
/// when the gap is too small.
pub fn require_disjoint(a: &RealMatrix, s: &RealMatrix, tol: &Tolerances) -> Result<f64> {
    let (ok, gap) = spectra_disjoint(a, s, tol)?;
    if ok {
        Ok(gap)
    } else {
        let sa = Spectrum::of(a)?;
        let ss = Spectrum::of(s)?;
        let scale = 1.0 + sa.spectral_radius().max(ss.spectral_radius());
        Err(Error::SpectraOverlap {
            gap,
            threshold: tol.spectral_gap * scale,
        })
    }
}

/// Extracts a full set of eigenvectors for a diagonalizable real matrix.
///
/// Eigenvalues are clustered at the spectral-gap scale; for each cluster of
/// multiplicity `k` the null space of `(S − λI)` must have dimension exactly
/// `k`, otherwise the matrix is (numerically) defective and
/// [`Error::DefectiveGenerator`] is returned. The returned `V` satisfies
/// `S·V ≈ V·diag(λ)` column-by-column and is verified to be invertible.
pub fn eigenvectors_diagonalizable(
    s: &RealMatrix,
    tol: &Tolerances,
) -> Result<(ComplexMatrix, Vec<Complex<f64>>)> {
    let n = s.nrows();
    if !s.is_square() {
        return Err(Error::DimensionMismatch(
            "eigenvector extraction requires a square matrix".into(),
        ));
    }
    let spec = Spectrum::of(s)?;
    let scale = 1.0 + spec.spectral_radius();
    let clusters = spec.clustered(tol.spectral_gap * scale * 10.0);

    let sc = complexify(s);
    let mut v = ComplexMatrix::zeros(n, n);
    let mut lams = Vec::with_capacity(n);
    let mut col = 0;
    for (lam, mult) in clusters {
        let mut shifted = sc.clone();
        for i in 0..n {
            shifted[(i, i)] -= lam;
        }
        // Basis of the eigenspace from the right singular vectors whose
        // singular values are at noise level.
        let svd = super::verified_svd_complex(&shifted)?;
        let v_t = svd.v_t;
        let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let thr = tol.rank_threshold(n, n, sigma_max.max(scale));
        let mut null_cols: Vec<usize> = (0..n)
            .filter(|&i| svd.singular_values[i] <= thr)
            .collect();
        null_cols.sort_unstable();
        if null_cols.len() != mult {
            return Err(Error::DefectiveGenerator(format!(
                "eigenvalue {lam} has algebraic multiplicity {mult} but geometric multiplicity {}",
                null_cols.len()
            )));
        }
        for &i in &null_cols {
            let row = v_t.row(i);
            for r in 0..n {
                v[(r, col)] = row[r].conj();
            }
            lams.push(lam);
            col += 1;
        }
    }
    if col != n {
        return Err(Error::DefectiveGenerator(format!(
            "collected {col} eigenvectors for dimension {n}"
        )));
    }
    // Invertibility check on V.
    let svd_v = super::verified_svd_complex(&v)?;
    let smin = svd_v.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = svd_v.singular_values.iter().cloned().fold(0.0, f64::max);
    if !(smin.is_finite() && smin > tol.rank_threshold(n, n, smax)) {
        return Err(Error::DefectiveGenerator(
            "eigenvector matrix is numerically singular".into(),
        ));
    }
    Ok((v, lams))
}
