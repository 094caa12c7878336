//! Data collaboration without sharing models or raw records.
//!
//! Each organization fits a private dimensionality reduction `f_i` and
//! uploads only two things: its reduced training data `f_i(X_i)` and its
//! reduced view `f_i(X^anc)` of a shared random anchor matrix. The analyst
//! aligns the per-organization views by factorizing the concatenated anchor
//! images and solving a least-squares map `G_i` per organization into the
//! common space; everything downstream (a single anomaly detector) runs on
//! the aligned representations. One upload and one download per
//! organization covers the entire pipeline, and the private `f_i` never
//! crosses the organization boundary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::numerics::{pinv, rowspace_fit_completed, svd, Matrix, PcaModel};

/// The shared anchor: a random matrix every organization projects through
/// its own private reduction.
#[derive(Clone, Debug)]
pub struct AnchorData {
    pub matrix: Matrix,
    pub r: usize,
    pub seed: u64,
}

/// Draws an `r x m` anchor with entries uniform in [0, 1).
///
/// The anchor lives in the encoded feature space (all coordinates
/// normalized to [0, 1]), so uniform sampling covers the same ranges the
/// real data occupies.
pub fn gen_anchor(m: usize, r: usize, seed: u64) -> Result<AnchorData> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "anchor needs at least 2 feature columns, got {}",
            m
        )));
    }
    if r < m {
        return Err(Error::InvalidArgument(format!(
            "anchor needs at least as many rows as feature columns ({} < {})",
            r, m
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let matrix = Matrix::from_fn(r, m, |_, _| rng.gen::<f64>());
    Ok(AnchorData { matrix, r, seed })
}

/// What one organization uploads: reduced data, reduced anchor, and the
/// reduced dimensionality. `data_rank` records how many of the `m_tilde`
/// directions carry actual data variance (the rest are deterministic
/// padding when the organization's data is rank deficient).
#[derive(Clone, Debug)]
pub struct IntermediateRep {
    pub org_id: usize,
    pub x_tilde: Matrix,
    pub anchor_tilde: Matrix,
    pub m_tilde: usize,
    pub data_rank: usize,
}

/// Fits the organization's private reduction and produces its upload.
///
/// The reduction is an orthonormal basis of the organization's dominant raw
/// row-space directions, fitted without mean removal: organizations whose
/// rows occupy a common subspace then upload views that differ only by a
/// rotation, which the analyst's alignment step absorbs exactly. (Removing
/// each organization's own mean would instead fold its location inside that
/// subspace into the basis, so heterogeneously distributed organizations
/// would stop being alignable.)
///
/// The returned [`PcaModel`] is the organization's private state: callers
/// keep it local and pass only the [`IntermediateRep`] onward. When the data
/// spans fewer than `target_dim` directions the representation keeps
/// `target_dim` columns (padded with deterministic orthonormal directions)
/// and `data_rank` records the genuine count.
pub fn make_intermediate(
    org_id: usize,
    data: &Matrix,
    anchor: &AnchorData,
    target_dim: usize,
) -> Result<(IntermediateRep, PcaModel)> {
    if data.cols() != anchor.matrix.cols() {
        return Err(Error::Dimension(format!(
            "data has {} feature columns but the anchor has {}",
            data.cols(),
            anchor.matrix.cols()
        )));
    }
    let (model, data_rank) = rowspace_fit_completed(data, target_dim)?;
    let x_tilde = model.project(data)?;
    let anchor_tilde = model.project(&anchor.matrix)?;
    Ok((
        IntermediateRep { org_id, x_tilde, anchor_tilde, m_tilde: target_dim, data_rank },
        model,
    ))
}

/// The analyst's alignment output: one map per organization into the
/// common collaboration space, plus the common anchor target.
#[derive(Clone, Debug)]
pub struct CollabTransform {
    g: BTreeMap<usize, Matrix>,
    pub m_hat: usize,
    /// Common anchor image all organizations are aligned to.
    pub u1_c: Matrix,
}

impl CollabTransform {
    /// The alignment map of one organization.
    pub fn g_for(&self, org_id: usize) -> Result<&Matrix> {
        self.g.get(&org_id).ok_or(Error::UnknownOrg(org_id))
    }

    /// Organization ids covered by this transform, ascending.
    pub fn org_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.g.keys().copied()
    }
}

/// Aligns the organizations' anchor images into one space.
///
/// The common target is the rank-`m_hat` left factor of the horizontally
/// concatenated anchor images (the arbitrary invertible factor on top of it
/// is fixed to the identity); each organization's map solves
/// `anchor_tilde_i * G_i ~= u1_c` in the least-squares sense. `m_hat`
/// defaults to the smallest uploaded dimensionality.
pub fn fit_collaboration(
    intermediates: &[IntermediateRep],
    m_hat: Option<usize>,
) -> Result<CollabTransform> {
    if intermediates.is_empty() {
        return Err(Error::InvalidArgument("no intermediate representations given".into()));
    }
    let r = intermediates[0].anchor_tilde.rows();
    let mut min_m_tilde = usize::MAX;
    for rep in intermediates {
        if rep.anchor_tilde.rows() != r {
            return Err(Error::Dimension(format!(
                "organization {} projected {} anchor rows, expected {}",
                rep.org_id,
                rep.anchor_tilde.rows(),
                r
            )));
        }
        if rep.anchor_tilde.cols() != rep.m_tilde || rep.x_tilde.cols() != rep.m_tilde {
            return Err(Error::Dimension(format!(
                "organization {} upload is inconsistent with its stated dimensionality {}",
                rep.org_id, rep.m_tilde
            )));
        }
        min_m_tilde = min_m_tilde.min(rep.m_tilde);
    }
    let m_hat = m_hat.unwrap_or(min_m_tilde);
    if m_hat == 0 || m_hat > min_m_tilde {
        return Err(Error::InvalidArgument(format!(
            "collaboration dimension {} must lie in [1, {}]",
            m_hat, min_m_tilde
        )));
    }

    let blocks: Vec<&Matrix> = intermediates.iter().map(|rep| &rep.anchor_tilde).collect();
    let concat = Matrix::hcat(&blocks)?;
    let dec = svd(&concat);
    let rank = dec.rank(concat.rows(), concat.cols());
    if m_hat > rank {
        return Err(Error::RankDeficient { rank, requested: m_hat });
    }
    let u1_c = dec.u.truncate_cols(m_hat);

    let mut g = BTreeMap::new();
    for rep in intermediates {
        if g.insert(rep.org_id, pinv(&rep.anchor_tilde).matmul(&u1_c)?).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate upload for organization {}",
                rep.org_id
            )));
        }
    }
    Ok(CollabTransform { g, m_hat, u1_c })
}

/// How far one organization's aligned anchor image sits from the common
/// target, as a relative Frobenius norm.
pub fn alignment_residual(transform: &CollabTransform, rep: &IntermediateRep) -> Result<f64> {
    let aligned = rep.anchor_tilde.matmul(transform.g_for(rep.org_id)?)?;
    let denom = transform.u1_c.frob_norm();
    if denom == 0.0 {
        return Err(Error::Validation("common anchor target is zero".into()));
    }
    Ok(aligned.sub(&transform.u1_c)?.frob_norm() / denom)
}

/// Maps an organization's reduced training data into the collaboration
/// space.
pub fn to_collab(transform: &CollabTransform, rep: &IntermediateRep) -> Result<Matrix> {
    let g = transform.g_for(rep.org_id)?;
    if rep.x_tilde.cols() != g.rows() {
        return Err(Error::Dimension(format!(
            "organization {} upload has {} columns but its map expects {}",
            rep.org_id,
            rep.x_tilde.cols(),
            g.rows()
        )));
    }
    rep.x_tilde.matmul(g)
}

/// Maps encoded test rows through an organization's private reduction and
/// its alignment map, producing rows the collaboration-space detector can
/// score.
pub fn transform_test(
    test: &Matrix,
    model: &PcaModel,
    transform: &CollabTransform,
    org_id: usize,
) -> Result<Matrix> {
    let g = transform.g_for(org_id)?;
    let reduced = model.project(test)?;
    if reduced.cols() != g.rows() {
        return Err(Error::Dimension(format!(
            "reduction yields {} columns but organization {}'s map expects {}",
            reduced.cols(),
            org_id,
            g.rows()
        )));
    }
    reduced.matmul(g)
}

/// Per-organization counters of boundary crossings between organizations
/// and the analyst.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommLedger {
    uploads: Vec<u64>,
    downloads: Vec<u64>,
}

impl CommLedger {
    pub fn new(orgs: usize) -> Self {
        CommLedger { uploads: vec![0; orgs], downloads: vec![0; orgs] }
    }

    pub fn orgs(&self) -> usize {
        self.uploads.len()
    }

    pub fn record_upload(&mut self, org: usize) -> Result<()> {
        match self.uploads.get_mut(org) {
            Some(c) => {
                *c += 1;
                Ok(())
            }
            None => Err(Error::UnknownOrg(org)),
        }
    }

    pub fn record_download(&mut self, org: usize) -> Result<()> {
        match self.downloads.get_mut(org) {
            Some(c) => {
                *c += 1;
                Ok(())
            }
            None => Err(Error::UnknownOrg(org)),
        }
    }

    pub fn uploads(&self, org: usize) -> u64 {
        self.uploads.get(org).copied().unwrap_or(0)
    }

    pub fn downloads(&self, org: usize) -> u64 {
        self.downloads.get(org).copied().unwrap_or(0)
    }

    pub fn total_uploads(&self) -> u64 {
        self.uploads.iter().sum()
    }

    pub fn total_downloads(&self) -> u64 {
        self.downloads.iter().sum()
    }
}

fn write_matrix(out: &mut String, m: &Matrix) {
    for i in 0..m.rows() {
        let row = m.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", v);
        }
        out.push('\n');
    }
}

/// Saves the analyst's output (alignment maps plus anchor parameters) as a
/// text artifact, so the organization-side deployment can run as a separate
/// process. The anchor matrix itself is not stored: it regenerates exactly
/// from its seed and shape.
pub fn save_collab_artifact(
    path: impl AsRef<Path>,
    transform: &CollabTransform,
    anchor: &AnchorData,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("dc-artifact v1\n");
    let _ = writeln!(out, "anchor_seed {}", anchor.seed);
    let _ = writeln!(out, "anchor_rows {}", anchor.r);
    let _ = writeln!(out, "anchor_cols {}", anchor.matrix.cols());
    let _ = writeln!(out, "m_hat {}", transform.m_hat);
    let _ = writeln!(out, "u1 {} {}", transform.u1_c.rows(), transform.u1_c.cols());
    write_matrix(&mut out, &transform.u1_c);
    out.push_str("org_id, m_tilde, m_hat\n");
    for (org, g) in &transform.g {
        let _ = writeln!(out, "{} {} {}", org, g.rows(), g.cols());
        write_matrix(&mut out, g);
    }
    std::fs::write(path, out)?;
    Ok(())
}

struct LineParser<'a> {
    lines: std::str::Lines<'a>,
    line_no: u64,
}

impl<'a> LineParser<'a> {
    fn next(&mut self) -> Result<(&'a str, u64)> {
        self.line_no += 1;
        match self.lines.next() {
            Some(l) => Ok((l, self.line_no)),
            None => Err(Error::Parse { line: self.line_no, msg: "unexpected end of file".into() }),
        }
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, no) = self.next()?;
        let rest = line
            .strip_prefix(key)
            .ok_or(Error::Parse { line: no, msg: format!("expected `{}`", key) })?;
        rest.trim()
            .parse()
            .map_err(|_| Error::Parse { line: no, msg: format!("bad value for `{}`", key) })
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (line, no) = self.next()?;
            let mut count = 0;
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Parse { line: no, msg: format!("bad float {:?}", tok) })?;
                data.push(v);
                count += 1;
            }
            if count != cols {
                return Err(Error::Parse {
                    line: no,
                    msg: format!("expected {} values, got {}", cols, count),
                });
            }
        }
        Matrix::from_vec(rows, cols, data)
    }
}

/// Loads a saved artifact, regenerating the anchor from its recorded seed.
pub fn load_collab_artifact(path: impl AsRef<Path>) -> Result<(CollabTransform, AnchorData)> {
    let text = std::fs::read_to_string(path)?;
    let mut p = LineParser { lines: text.lines(), line_no: 0 };

    let (magic, no) = p.next()?;
    if magic.trim() != "dc-artifact v1" {
        return Err(Error::Parse { line: no, msg: format!("unrecognized artifact {:?}", magic) });
    }
    let anchor_seed: u64 = p.keyed("anchor_seed")?;
    let anchor_rows: usize = p.keyed("anchor_rows")?;
    let anchor_cols: usize = p.keyed("anchor_cols")?;
    let m_hat: usize = p.keyed("m_hat")?;

    let (u1_line, no) = p.next()?;
    let dims: Vec<&str> = u1_line.split_whitespace().collect();
    if dims.len() != 3 || dims[0] != "u1" {
        return Err(Error::Parse { line: no, msg: "expected `u1 <rows> <cols>`".into() });
    }
    let u_rows: usize =
        dims[1].parse().map_err(|_| Error::Parse { line: no, msg: "bad u1 rows".into() })?;
    let u_cols: usize =
        dims[2].parse().map_err(|_| Error::Parse { line: no, msg: "bad u1 cols".into() })?;
    let u1_c = p.matrix(u_rows, u_cols)?;

    let (header, no) = p.next()?;
    if header.trim() != "org_id, m_tilde, m_hat" {
        return Err(Error::Parse { line: no, msg: format!("bad org header {:?}", header) });
    }

    let mut g = BTreeMap::new();
    loop {
        p.line_no += 1;
        let Some(line) = p.lines.next() else { break };
        if line.trim().is_empty() {
            continue;
        }
        let no = p.line_no;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                line: no,
                msg: "expected `<org_id> <m_tilde> <m_hat>`".into(),
            });
        }
        let org: usize =
            parts[0].parse().map_err(|_| Error::Parse { line: no, msg: "bad org id".into() })?;
        let m_tilde: usize =
            parts[1].parse().map_err(|_| Error::Parse { line: no, msg: "bad m_tilde".into() })?;
        let cols: usize =
            parts[2].parse().map_err(|_| Error::Parse { line: no, msg: "bad m_hat".into() })?;
        if cols != m_hat {
            return Err(Error::Validation(format!(
                "organization {} map has {} columns but the artifact says m_hat = {}",
                org, cols, m_hat
            )));
        }
        let matrix = p.matrix(m_tilde, cols)?;
        if g.insert(org, matrix).is_some() {
            return Err(Error::Validation(format!("duplicate organization {} in artifact", org)));
        }
    }
    if u_cols != m_hat {
        return Err(Error::Validation(format!(
            "anchor target has {} columns but the artifact says m_hat = {}",
            u_cols, m_hat
        )));
    }

    let anchor = gen_anchor(anchor_cols, anchor_rows, anchor_seed)?;
    Ok((CollabTransform { g, m_hat, u1_c }, anchor))
}
