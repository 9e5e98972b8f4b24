//! Python bindings: datasets, simulation, the full scan and categorization.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cfss_core::ingest::CategorizationScheme;
use cfss_core::simulate::{self, Holding};
use cfss_core::{
    fixtures, io, scan, BasisKind, BasisSpec, Individual, Location, ScanConfig, Scenario, ScenarioSpec,
    SpatialDataset, StatePath, StateSpace,
};

fn py_err(e: cfss_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn locations_from(points: Vec<(String, f64, f64)>) -> Vec<Location> {
    points.into_iter().map(|(id, x, y)| Location::new(id, x, y)).collect()
}

/// Categorical trajectories grouped by location.
#[pyclass(name = "Dataset", module = "cfss")]
#[derive(Clone)]
struct PyDataset {
    inner: SpatialDataset,
}

#[pymethods]
impl PyDataset {
    /// Builds a dataset from `(id, x, y)` locations and
    /// `(id, location_id, [(time, state), ...])` individuals.
    #[staticmethod]
    #[pyo3(signature = (locations, individuals, horizon, states=None))]
    fn from_paths(
        locations: Vec<(String, f64, f64)>,
        individuals: Vec<(String, String, Vec<(f64, String)>)>,
        horizon: f64,
        states: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let locations = locations_from(locations);
        let space = match states {
            Some(s) => s,
            None => {
                let mut labels: Vec<String> = individuals
                    .iter()
                    .flat_map(|(_, _, segs)| segs.iter().map(|(_, s)| s.clone()))
                    .collect();
                labels.sort();
                labels.dedup();
                labels
            }
        };
        let space = StateSpace::new(space).map_err(py_err)?;
        let mut groups = vec![Vec::new(); locations.len()];
        for (id, loc, segs) in individuals {
            let k = locations
                .iter()
                .position(|l| l.id == loc)
                .ok_or_else(|| PyValueError::new_err(format!("unknown location `{loc}`")))?;
            let mut segments = Vec::with_capacity(segs.len());
            for (t, label) in segs {
                let s = space
                    .index_of(&label)
                    .ok_or_else(|| PyValueError::new_err(format!("unknown state `{label}`")))?;
                segments.push((t, s));
            }
            groups[k].push(Individual::new(id, StatePath::new(segments, horizon).map_err(py_err)?));
        }
        let inner = SpatialDataset::new(space, horizon, locations, groups).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Reads the long-format trajectory CSV and a locations CSV.
    #[staticmethod]
    fn from_csv(trajectories: &str, locations: &str) -> PyResult<Self> {
        let locs = io::read_locations(locations).map_err(py_err)?;
        let inner = io::read_trajectories(trajectories, locs, None).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Simulates one of the scenarios `"i"`, `"ii"`, `"iii"`. Geometry and
    /// cluster default to the bundled départements and Île-de-France.
    #[staticmethod]
    #[pyo3(signature = (scenario, strength, seed=1, horizon=18.0, per_location=10, holding="rate", geometry=None, cluster=None))]
    #[allow(clippy::too_many_arguments)]
    fn simulate(
        scenario: &str,
        strength: f64,
        seed: u64,
        horizon: f64,
        per_location: usize,
        holding: &str,
        geometry: Option<Vec<(String, f64, f64)>>,
        cluster: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let scenario: Scenario = scenario.parse().map_err(py_err)?;
        let holding: Holding = holding.parse().map_err(py_err)?;
        let locations = geometry.map(locations_from).unwrap_or_else(fixtures::departements);
        let spec = ScenarioSpec {
            scenario,
            strength,
            horizon,
            per_location,
            cluster: cluster.unwrap_or_else(fixtures::cluster_idf),
            holding,
        };
        let inner = simulate::simulate_dataset(&locations, &spec, seed).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_csv(&self, trajectories: &str, locations: &str) -> PyResult<()> {
        let t = std::fs::File::create(trajectories).map_err(|e| py_err(e.into()))?;
        io::write_trajectories(&self.inner, t).map_err(py_err)?;
        let l = std::fs::File::create(locations).map_err(|e| py_err(e.into()))?;
        io::write_locations(self.inner.locations(), l).map_err(py_err)
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner.state_space().labels().to_vec()
    }

    #[getter]
    fn location_ids(&self) -> Vec<String> {
        self.inner.locations().iter().map(|l| l.id.clone()).collect()
    }

    #[getter]
    fn counts(&self) -> Vec<usize> {
        self.inner.counts()
    }

    #[getter]
    fn n_individuals(&self) -> usize {
        self.inner.n_individuals()
    }

    /// `(id, location_id, [(start, state), ...])` for every individual.
    fn paths(&self) -> Vec<(String, String, Vec<(f64, String)>)> {
        let space = self.inner.state_space();
        self.inner
            .iter_individuals()
            .map(|(k, ind)| {
                let segs = ind
                    .path
                    .segments()
                    .iter()
                    .map(|s| (s.start, space.label(s.state).to_string()))
                    .collect();
                (ind.id.clone(), self.inner.locations()[k].id.clone(), segs)
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.n_individuals()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(locations={}, individuals={}, states={}, horizon={})",
            self.inner.locations().len(),
            self.inner.n_individuals(),
            self.inner.n_states(),
            self.inner.horizon()
        )
    }
}

/// Outcome of [`scan`].
#[pyclass(name = "ScanResult", module = "cfss")]
struct PyScanResult {
    inner: scan::ScanResult,
    location_ids: Vec<String>,
}

#[pymethods]
impl PyScanResult {
    #[getter]
    fn statistic(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn p_value(&self) -> f64 {
        self.inner.p_value
    }

    #[getter]
    fn permutations(&self) -> usize {
        self.inner.permutations
    }

    #[getter]
    fn exceedances(&self) -> usize {
        self.inner.exceedances
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Location ids of the most likely cluster.
    #[getter]
    fn mlc(&self) -> Vec<String> {
        self.inner.mlc.members.iter().map(|&k| self.location_ids[k].clone()).collect()
    }

    #[getter]
    fn mlc_center(&self) -> String {
        self.location_ids[self.inner.mlc.center].clone()
    }

    #[getter]
    fn mlc_radius(&self) -> f64 {
        self.inner.mlc.radius
    }

    #[getter]
    fn windows_evaluated(&self) -> usize {
        self.inner.windows.len()
    }

    #[getter]
    fn n_components(&self) -> usize {
        self.inner.encoding.m
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.encoding.eigenvalues.clone()
    }

    /// Score matrix as a list of rows (individual order of the dataset).
    #[getter]
    fn scores(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.encoding.scores)
    }

    #[getter]
    fn ranks(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.ranks.ranks)
    }

    fn is_significant(&self, level: f64) -> bool {
        self.inner.is_significant(level)
    }

    fn __repr__(&self) -> String {
        format!(
            "ScanResult(statistic={:.4}, p_value={}, mlc={:?})",
            self.inner.lambda,
            self.inner.p_value,
            self.mlc()
        )
    }
}

fn rows(m: &cfss_core::nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Runs encoding, ranking, the window scan and the permutation test.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (dataset, permutations=999, seed=1, basis="bspline", basis_size=10, basis_degree=3, variance_threshold=0.9))]
fn run_scan(
    py: Python<'_>,
    dataset: &PyDataset,
    permutations: usize,
    seed: u64,
    basis: &str,
    basis_size: usize,
    basis_degree: usize,
    variance_threshold: f64,
) -> PyResult<PyScanResult> {
    let kind: BasisKind = basis.parse().map_err(py_err)?;
    let config = ScanConfig {
        basis: BasisSpec {
            kind,
            size: basis_size,
            degree: basis_degree,
        },
        variance_threshold,
        permutations,
        seed,
        ..ScanConfig::default()
    };
    let ds = &dataset.inner;
    let inner = py.allow_threads(|| cfss_core::run_scan(ds, &config)).map_err(py_err)?;
    Ok(PyScanResult {
        inner,
        location_ids: dataset.location_ids(),
    })
}

/// Category label of a concentration value (Atmo scheme unless a scheme
/// file is given).
#[pyfunction]
#[pyo3(signature = (value, scheme=None))]
fn categorize(value: f64, scheme: Option<&str>) -> PyResult<String> {
    let scheme = match scheme {
        Some(p) => CategorizationScheme::from_path(p).map_err(py_err)?,
        None => CategorizationScheme::atmo(),
    };
    scheme.categorize(value).map(str::to_string).map_err(py_err)
}

/// `(1 + exceedances) / (1 + permutations)`.
#[pyfunction]
fn dwass_pvalue(exceedances: usize, permutations: usize) -> f64 {
    scan::dwass_pvalue(exceedances, permutations)
}

/// Bundled `(id, x, y)` centroids of the 94 mainland départements.
#[pyfunction]
fn departements() -> Vec<(String, f64, f64)> {
    fixtures::departements().into_iter().map(|l| (l.id, l.x, l.y)).collect()
}

/// The eight Île-de-France département ids.
#[pyfunction]
fn cluster_idf() -> Vec<String> {
    fixtures::cluster_idf()
}

#[pymodule]
#[pyo3(name = "cfss")]
fn cfss_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyScanResult>()?;
    m.add_function(wrap_pyfunction!(run_scan, m)?)?;
    m.add_function(wrap_pyfunction!(categorize, m)?)?;
    m.add_function(wrap_pyfunction!(dwass_pvalue, m)?)?;
    m.add_function(wrap_pyfunction!(departements, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_idf, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
