//! Experiment batches: generation from a known system, additive noise, and
//! the JSON dataset file.
//!
//! A batch ([`ExperimentSet`]) holds `N` experiments sharing one horizon
//! `T`: stacked inputs `U` (`mT x N`, reversed-time row blocks), initial
//! states `X0` (`n x N`) and final states `X` (`n x N`).
//!
//! Random draws come from ChaCha streams keyed by `(seed, set index, role)`,
//! so the contents of one set do not depend on the sizes of the others and
//! generation order does not matter.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::lti::{controllability_matrix, matrix_from_rows, rows_of, LtiSystem};
use crate::matops::ensure_finite;
use crate::{Error, Matrix, Result};

/// Independent RNG stream for `(master, path...)`. At most three path words.
pub fn seeded_stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    assert!(path.len() <= 3, "seed path too long");
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    for (i, word) in path.iter().enumerate() {
        key[8 * (i + 1)..8 * (i + 2)].copy_from_slice(&word.to_le_bytes());
    }
    // Distinguish paths of different lengths that share a prefix of zeros.
    key[31] ^= (path.len() as u8) << 4;
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, Copy)]
enum Role {
    InitialStates = 0,
    Inputs = 1,
    NoiseInputs = 2,
    NoiseInitial = 3,
    NoiseFinal = 4,
}

/// Distribution of the generated initial states and inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleDist {
    /// i.i.d. standard normal entries.
    #[default]
    Normal,
    /// i.i.d. uniform entries on `[0, 1)`.
    Uniform01,
}

impl SampleDist {
    fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            SampleDist::Normal => rng.sample(StandardNormal),
            SampleDist::Uniform01 => rng.random::<f64>(),
        }
    }
}

impl std::str::FromStr for SampleDist {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "normal" => Ok(SampleDist::Normal),
            "uniform01" => Ok(SampleDist::Uniform01),
            other => Err(format!("unknown distribution `{other}` (expected normal|uniform01)")),
        }
    }
}

/// Column-major fill so that growing `cols` keeps earlier columns intact.
fn sample_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R, dist: SampleDist) -> Matrix {
    Matrix::from_iterator(rows, cols, (0..rows * cols).map(|_| dist.sample(rng)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSet {
    horizon: usize,
    inputs: Matrix,
    initial_states: Matrix,
    final_states: Matrix,
}

impl ExperimentSet {
    pub fn new(horizon: usize, inputs: Matrix, initial_states: Matrix, final_states: Matrix) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::BadShape("horizon must be at least 1".into()));
        }
        let count = inputs.ncols();
        if count == 0 {
            return Err(Error::BadShape("a set needs at least one experiment".into()));
        }
        if initial_states.ncols() != count || final_states.ncols() != count {
            return Err(Error::BadShape(format!(
                "column counts differ: U has {count}, X0 has {}, X has {}",
                initial_states.ncols(),
                final_states.ncols()
            )));
        }
        if initial_states.nrows() != final_states.nrows() || initial_states.nrows() == 0 {
            return Err(Error::BadShape(format!(
                "X0 has {} rows, X has {}",
                initial_states.nrows(),
                final_states.nrows()
            )));
        }
        if inputs.nrows() == 0 || !inputs.nrows().is_multiple_of(horizon) {
            return Err(Error::BadShape(format!(
                "U has {} rows, not a positive multiple of T = {horizon}",
                inputs.nrows()
            )));
        }
        ensure_finite(&inputs, "U")?;
        ensure_finite(&initial_states, "X0")?;
        ensure_finite(&final_states, "X")?;
        Ok(ExperimentSet {
            horizon,
            inputs,
            initial_states,
            final_states,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of experiments `N`.
    pub fn count(&self) -> usize {
        self.inputs.ncols()
    }

    /// `U`, `mT x N`.
    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    /// `X0`, `n x N`.
    pub fn initial_states(&self) -> &Matrix {
        &self.initial_states
    }

    /// `X`, `n x N`.
    pub fn final_states(&self) -> &Matrix {
        &self.final_states
    }

    fn n(&self) -> usize {
        self.initial_states.nrows()
    }

    fn m(&self) -> usize {
        self.inputs.nrows() / self.horizon
    }
}

/// Known noise variances; entries are perturbed by i.i.d. zero-mean Gaussians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma2_u: f64,
    pub sigma2_x0: f64,
    pub sigma2_x: f64,
}

impl NoiseModel {
    pub fn new(sigma2_u: f64, sigma2_x0: f64, sigma2_x: f64) -> Result<Self> {
        for (name, v) in [("sigma2_U", sigma2_u), ("sigma2_X0", sigma2_x0), ("sigma2_X", sigma2_x)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::BadShape(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(NoiseModel {
            sigma2_u,
            sigma2_x0,
            sigma2_x,
        })
    }

    /// Same variance on all three data matrices.
    pub fn uniform(sigma2: f64) -> Result<Self> {
        NoiseModel::new(sigma2, sigma2, sigma2)
    }

    pub fn zero() -> Self {
        NoiseModel {
            sigma2_u: 0.0,
            sigma2_x0: 0.0,
            sigma2_x: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sigma2_u == 0.0 && self.sigma2_x0 == 0.0 && self.sigma2_x == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    m: usize,
    seed: u64,
    noise: Option<NoiseModel>,
    sets: Vec<ExperimentSet>,
}

impl Dataset {
    /// Noiseless dataset from explicit sets.
    pub fn new(n: usize, m: usize, sets: Vec<ExperimentSet>, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::BadShape("n and m must be positive".into()));
        }
        if sets.is_empty() {
            return Err(Error::BadShape("dataset needs at least one set".into()));
        }
        for (i, set) in sets.iter().enumerate() {
            if set.n() != n || set.m() != m {
                return Err(Error::BadShape(format!(
                    "set {i} has n = {}, m = {}; dataset has n = {n}, m = {m}",
                    set.n(),
                    set.m()
                )));
            }
        }
        Ok(Dataset {
            n,
            m,
            seed,
            noise: None,
            sets,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref()
    }

    pub fn sets(&self) -> &[ExperimentSet] {
        &self.sets
    }

    pub fn set(&self, index: usize) -> Option<&ExperimentSet> {
        self.sets.get(index)
    }

    pub fn horizons(&self) -> Vec<usize> {
        self.sets.iter().map(ExperimentSet::horizon).collect()
    }
}

/// Runs `counts[i]` experiments of horizon `horizons[i]` on `sys` with random
/// initial states and inputs.
pub fn collect_experiments(
    sys: &LtiSystem,
    horizons: &[usize],
    counts: &[usize],
    seed: u64,
    dist: SampleDist,
) -> Result<Dataset> {
    if horizons.len() != counts.len() || horizons.is_empty() {
        return Err(Error::BadShape(format!(
            "{} horizons but {} counts",
            horizons.len(),
            counts.len()
        )));
    }
    let (n, m) = (sys.n(), sys.m());
    let sets = horizons
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(i, (&horizon, &count))| {
            if horizon == 0 || count == 0 {
                return Err(Error::BadShape(format!(
                    "set {i}: horizon and count must be positive (T = {horizon}, N = {count})"
                )));
            }
            let i = i as u64;
            let x0 = sample_matrix(
                n,
                count,
                &mut seeded_stream(seed, &[i, Role::InitialStates as u64]),
                dist,
            );
            let u = sample_matrix(
                m * horizon,
                count,
                &mut seeded_stream(seed, &[i, Role::Inputs as u64]),
                dist,
            );
            let x = sys.transition(horizon) * &x0 + controllability_matrix(sys, horizon) * &u;
            ExperimentSet::new(horizon, u, x0, x)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(n, m, sets, seed)
}

/// Returns a copy of `ds` with every entry of every `U`, `X0`, `X` perturbed
/// by independent zero-mean Gaussian noise of the given variances.
pub fn inject_noise(ds: &Dataset, noise: NoiseModel, seed: u64) -> Result<Dataset> {
    if ds.noise.is_some() {
        return Err(Error::AlreadyNoisy);
    }
    let perturb = |m: &Matrix, variance: f64, i: usize, role: Role| -> Matrix {
        let sd = variance.sqrt();
        let mut rng = seeded_stream(seed, &[i as u64, role as u64]);
        let w = Matrix::from_iterator(
            m.nrows(),
            m.ncols(),
            (0..m.len()).map(|_| sd * rng.sample::<f64, _>(StandardNormal)),
        );
        m + w
    };
    let sets = ds
        .sets
        .iter()
        .enumerate()
        .map(|(i, s)| ExperimentSet {
            horizon: s.horizon,
            inputs: perturb(&s.inputs, noise.sigma2_u, i, Role::NoiseInputs),
            initial_states: perturb(&s.initial_states, noise.sigma2_x0, i, Role::NoiseInitial),
            final_states: perturb(&s.final_states, noise.sigma2_x, i, Role::NoiseFinal),
        })
        .collect();
    Ok(Dataset {
        noise: Some(noise),
        sets,
        ..ds.clone()
    })
}

/// Three unit experiments of horizon 2 on `x(t+1) = a x(t) + u(t)`:
/// one free response from `x0 = 1` and two input pulses from rest.
pub fn scalar_demo(a: f64) -> Result<Dataset> {
    let u = Matrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let x0 = Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
    let x = Matrix::from_row_slice(1, 3, &[a * a, 1.0, a]);
    Dataset::new(1, 1, vec![ExperimentSet::new(2, u, x0, x)?], 0)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    n: usize,
    m: usize,
    seed: u64,
    noise: Option<NoiseFile>,
    sets: Vec<SetFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseFile {
    #[serde(rename = "sigma2_U")]
    sigma2_u: f64,
    #[serde(rename = "sigma2_X0")]
    sigma2_x0: f64,
    #[serde(rename = "sigma2_X")]
    sigma2_x: f64,
    kind: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetFile {
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(rename = "N")]
    count: usize,
    #[serde(rename = "U")]
    inputs: Vec<Vec<f64>>,
    #[serde(rename = "X0")]
    initial_states: Vec<Vec<f64>>,
    #[serde(rename = "X")]
    final_states: Vec<Vec<f64>>,
}

const NOISE_KIND: &str = "gaussian";

fn violation(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::SchemaViolation {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Canonical JSON text of a dataset.
pub fn to_json(ds: &Dataset) -> String {
    let file = DatasetFile {
        n: ds.n,
        m: ds.m,
        seed: ds.seed,
        noise: ds.noise.map(|nm| NoiseFile {
            sigma2_u: nm.sigma2_u,
            sigma2_x0: nm.sigma2_x0,
            sigma2_x: nm.sigma2_x,
            kind: NOISE_KIND.into(),
        }),
        sets: ds
            .sets
            .iter()
            .map(|s| SetFile {
                horizon: s.horizon,
                count: s.count(),
                inputs: rows_of(&s.inputs),
                initial_states: rows_of(&s.initial_states),
                final_states: rows_of(&s.final_states),
            })
            .collect(),
    };
    let mut text = serde_json::to_string(&file).expect("plain data serializes");
    text.push('\n');
    text
}

pub fn from_json(text: &str) -> Result<Dataset> {
    let file: DatasetFile = serde_json::from_str(text).map_err(|e| violation("$", e.to_string()))?;
    if file.n == 0 || file.m == 0 {
        return Err(violation(if file.n == 0 { "n" } else { "m" }, "must be positive"));
    }
    if file.sets.is_empty() {
        return Err(violation("sets", "at least one set is required"));
    }
    let noise = match file.noise {
        None => None,
        Some(nf) => {
            if nf.kind != NOISE_KIND {
                return Err(violation("noise.kind", format!("unsupported kind `{}`", nf.kind)));
            }
            Some(
                NoiseModel::new(nf.sigma2_u, nf.sigma2_x0, nf.sigma2_x)
                    .map_err(|e| violation("noise", e.to_string()))?,
            )
        }
    };
    let mut sets = Vec::with_capacity(file.sets.len());
    for (i, sf) in file.sets.into_iter().enumerate() {
        let at = |field: &str| format!("sets[{i}].{field}");
        if sf.horizon == 0 {
            return Err(violation(at("T"), "must be at least 1"));
        }
        if sf.count == 0 {
            return Err(violation(at("N"), "must be at least 1"));
        }
        let checks: [(&str, &Vec<Vec<f64>>, usize); 3] = [
            ("U", &sf.inputs, file.m * sf.horizon),
            ("X0", &sf.initial_states, file.n),
            ("X", &sf.final_states, file.n),
        ];
        for (field, rows, expected_rows) in checks {
            if rows.len() != expected_rows {
                return Err(violation(
                    at(field),
                    format!("{} rows, expected {expected_rows}", rows.len()),
                ));
            }
            if let Some(r) = rows.iter().position(|row| row.len() != sf.count) {
                return Err(violation(
                    format!("{}[{r}]", at(field)),
                    format!("{} columns, expected N = {}", rows[r].len(), sf.count),
                ));
            }
        }
        let set = ExperimentSet::new(
            sf.horizon,
            matrix_from_rows(&sf.inputs, &at("U"))?,
            matrix_from_rows(&sf.initial_states, &at("X0"))?,
            matrix_from_rows(&sf.final_states, &at("X"))?,
        )
        .map_err(|e| violation(format!("sets[{i}]"), e.to_string()))?;
        sets.push(set);
    }
    let mut ds = Dataset::new(file.n, file.m, sets, file.seed)?;
    ds.noise = noise;
    Ok(ds)
}

pub fn save(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(ds))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Dataset> {
    from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::numerical_rank;

    fn random_system(seed: u64, n: usize, m: usize) -> LtiSystem {
        LtiSystem::random(n, m, &mut seeded_stream(seed, &[])).unwrap()
    }

    #[test]
    fn heterogeneous_batch_shapes() {
        let sys = random_system(1, 20, 2);
        let ds = collect_experiments(&sys, &[3, 4, 5, 6], &[40; 4], 7, SampleDist::Normal).unwrap();
        assert_eq!(ds.sets().len(), 4);
        for (set, t) in ds.sets().iter().zip([3, 4, 5, 6]) {
            assert_eq!(set.inputs().shape(), (2 * t, 40));
            assert_eq!(set.initial_states().shape(), (20, 40));
            assert_eq!(set.final_states().shape(), (20, 40));
        }
    }

    #[test]
    fn noiseless_sets_obey_the_dynamics() {
        let sys = random_system(2, 5, 2);
        let ds = collect_experiments(&sys, &[1, 3, 4], &[9, 12, 30], 3, SampleDist::Uniform01).unwrap();
        for set in ds.sets() {
            let t = set.horizon();
            let predicted = sys.transition(t) * set.initial_states() + controllability_matrix(&sys, t) * set.inputs();
            assert!((predicted - set.final_states()).amax() <= 1e-10);
        }
    }

    #[test]
    fn generation_is_deterministic_and_stream_separated() {
        let sys = random_system(3, 3, 1);
        let a = collect_experiments(&sys, &[2, 3], &[5, 6], 11, SampleDist::Normal).unwrap();
        let b = collect_experiments(&sys, &[2, 3], &[5, 6], 11, SampleDist::Normal).unwrap();
        assert_eq!(a, b);
        assert_eq!(to_json(&a), to_json(&b));
        // Changing the first count leaves the second set untouched.
        let c = collect_experiments(&sys, &[2, 3], &[9, 6], 11, SampleDist::Normal).unwrap();
        assert_eq!(a.sets()[1], c.sets()[1]);
        // Extra columns extend, not reshuffle.
        assert_eq!(c.sets()[0].inputs().columns(0, 5), a.sets()[0].inputs().columns(0, 5));
    }

    #[test]
    fn mismatched_lists_are_rejected() {
        let sys = random_system(4, 2, 1);
        assert!(matches!(
            collect_experiments(&sys, &[1, 2], &[3], 0, SampleDist::Normal),
            Err(Error::BadShape(_))
        ));
        assert!(matches!(
            collect_experiments(&sys, &[2], &[0], 0, SampleDist::Normal),
            Err(Error::BadShape(_))
        ));
    }

    #[test]
    fn enough_gaussian_experiments_give_full_row_rank() {
        let sys = random_system(5, 4, 2);
        let horizons = [1, 2, 3];
        let counts: Vec<usize> = horizons.iter().map(|t| t * 2 + 4).collect();
        let ds = collect_experiments(&sys, &horizons, &counts, 5, SampleDist::Normal).unwrap();
        for set in ds.sets() {
            let stacked = matops_stack(set.initial_states(), set.inputs());
            assert_eq!(numerical_rank(&stacked), stacked.nrows());
        }
    }

    fn matops_stack(top: &Matrix, bottom: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
        out.rows_mut(0, top.nrows()).copy_from(top);
        out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
        out
    }

    #[test]
    fn zero_noise_is_identity() {
        let sys = random_system(6, 3, 1);
        let ds = collect_experiments(&sys, &[2], &[6], 1, SampleDist::Normal).unwrap();
        let noisy = inject_noise(&ds, NoiseModel::zero(), 9).unwrap();
        assert_eq!(noisy.sets(), ds.sets());
        assert_eq!(noisy.noise(), Some(&NoiseModel::zero()));
        assert!(ds.noise().is_none());
    }

    #[test]
    fn noise_is_additive_and_seed_dependent() {
        let sys = random_system(7, 2, 1);
        let ds = collect_experiments(&sys, &[2], &[50], 1, SampleDist::Normal).unwrap();
        let nm = NoiseModel::uniform(0.5).unwrap();
        let a = inject_noise(&ds, nm, 1).unwrap();
        let b = inject_noise(&ds, nm, 2).unwrap();
        let wa = a.sets()[0].inputs() - ds.sets()[0].inputs();
        let wb = b.sets()[0].inputs() - ds.sets()[0].inputs();
        assert!((wa - wb).amax() > 0.0);
        // Subtracting the perturbation recovers the clean data.
        let wa = a.sets()[0].final_states() - ds.sets()[0].final_states();
        assert!((a.sets()[0].final_states() - wa - ds.sets()[0].final_states()).amax() <= 1e-12);
        assert!(matches!(inject_noise(&a, nm, 3), Err(Error::AlreadyNoisy)));
    }

    #[test]
    fn noise_has_requested_variance() {
        let sys = random_system(8, 4, 2);
        let ds = collect_experiments(&sys, &[3, 4], &[10_000, 10_000], 1, SampleDist::Uniform01).unwrap();
        let noisy = inject_noise(&ds, NoiseModel::uniform(0.1).unwrap(), 2).unwrap();
        for (clean, dirty) in ds.sets().iter().zip(noisy.sets()) {
            assert_eq!(dirty.inputs().shape(), clean.inputs().shape());
            assert_eq!(dirty.horizon(), clean.horizon());
            for (c, d) in [
                (clean.inputs(), dirty.inputs()),
                (clean.initial_states(), dirty.initial_states()),
                (clean.final_states(), dirty.final_states()),
            ] {
                let w = d - c;
                let mean = w.mean();
                let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
                assert!((var - 0.1).abs() <= 0.01, "sample variance {var}");
            }
        }
    }

    #[test]
    fn json_round_trip_is_canonical() {
        let sys = random_system(9, 3, 2);
        let ds = collect_experiments(&sys, &[1, 2], &[4, 7], 42, SampleDist::Normal).unwrap();
        let ds = inject_noise(&ds, NoiseModel::new(0.1, 0.2, 0.3).unwrap(), 5).unwrap();
        let text = to_json(&ds);
        let back = from_json(&text).unwrap();
        assert_eq!(back, ds);
        assert_eq!(to_json(&back), text);
    }

    #[test]
    fn scalar_demo_round_trips_exactly() {
        let ds = scalar_demo(0.3).unwrap();
        let back = from_json(&to_json(&ds)).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.sets()[0].final_states()[(0, 0)], 0.3 * 0.3);
        assert!(to_json(&ds).contains("\"noise\":null"));
    }

    #[test]
    fn column_count_mismatch_names_the_set() {
        let text = r#"{"n":1,"m":1,"seed":0,"noise":null,"sets":[
            {"T":1,"N":2,"U":[[1.0,2.0]],"X0":[[1.0,0.0]],"X":[[1.0,0.0]]},
            {"T":1,"N":2,"U":[[1.0,2.0]],"X0":[[1.0]],"X":[[1.0,0.0]]}]}"#;
        match from_json(text) {
            Err(Error::SchemaViolation { path, .. }) => assert_eq!(path, "sets[1].X0[0]"),
            other => panic!("expected schema violation, got {other:?}"),
        }
    }

    #[test]
    fn schema_rejects_bad_rows_and_kinds() {
        let bad_rows = r#"{"n":1,"m":1,"seed":0,"noise":null,"sets":[
            {"T":2,"N":1,"U":[[1.0]],"X0":[[1.0]],"X":[[1.0]]}]}"#;
        assert!(matches!(from_json(bad_rows), Err(Error::SchemaViolation { path, .. }) if path == "sets[0].U"));
        let bad_kind = r#"{"n":1,"m":1,"seed":0,
            "noise":{"sigma2_U":0.1,"sigma2_X0":0.1,"sigma2_X":0.1,"kind":"laplace"},
            "sets":[{"T":1,"N":1,"U":[[1.0]],"X0":[[1.0]],"X":[[1.0]]}]}"#;
        assert!(matches!(from_json(bad_kind), Err(Error::SchemaViolation { path, .. }) if path == "noise.kind"));
        let missing = r#"{"n":1,"m":1,"seed":0,"sets":[]}"#;
        assert!(matches!(from_json(missing), Err(Error::SchemaViolation { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("ddmec-datagen-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.json");
        let ds = scalar_demo(0.5).unwrap();
        save(&ds, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        save(&load(&path).unwrap(), &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        assert!(matches!(load(&dir.join("missing.json")), Err(Error::Io(_))));
        std::fs::remove_dir_all(&dir).ok();
    }
}
