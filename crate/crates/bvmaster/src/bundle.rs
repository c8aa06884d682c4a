//! Machine-readable result bundles.
//!
//! Every command emits one JSON document. All maps are `BTreeMap`s, all
//! word keys are canonical strings, and all rationals are exact `"p/q"`
//! strings, so the same input and engine version always produce the same
//! bytes. Bundles round-trip through serde losslessly.
//!
//! Word keys: a degree-`n` word is its weakly increasing letter list joined
//! with commas (`"1,1,2"` for `t¹t¹t²`, up to the symmetric normalisation).
//! ħ-polynomials are coefficient arrays starting at `ħ⁰`; Laurent
//! polynomials carry an explicit `shift` for their lowest power.

use std::collections::BTreeMap;

use bvqft::correlators::CorrelatorData;
use bvqft::model::{Model, ModelClass};
use bvqft::scalar::{HbarLaurent, HbarScalar, Rat};
use bvqft::solver::{CheckRecord, MasterState, SolverError};
use bvqft::tower::ObstructionTower;
use bvqft::tseries::Word;
use serde::{Deserialize, Serialize};

/// Engine identification and the arithmetic conventions the numbers in the
/// bundle depend on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineStamp {
    /// Package name.
    pub name: String,
    /// Package version.
    pub version: String,
    /// One-line fingerprint of the sign conventions in force.
    pub conventions: String,
}

impl EngineStamp {
    /// The stamp for this build.
    pub fn current() -> Self {
        EngineStamp {
            name: "bvmaster".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            conventions: "left derivatives; delta = sum_pairs sign d_field d_antifield with \
                          sign -1 iff field odd; bracket from K = Q - hbar*delta; Q(c*) = -R"
                .into(),
        }
    }
}

/// What the model looked like after construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSummary {
    /// `"isolated"` or `"gauged"`.
    pub class: String,
    /// Number of declared variables.
    pub variables: usize,
    /// Canonical text of the action.
    pub action: String,
    /// Cohomology dimension.
    pub h_dimension: usize,
    /// Index of the class used by the default expectation functional.
    pub socle: usize,
    /// Gauged models: class counts per power of the scaling coordinate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<usize>>,
}

impl ModelSummary {
    /// Reads the summary off a built model.
    pub fn new(model: &Model) -> Self {
        ModelSummary {
            class: match model.class() {
                ModelClass::Isolated => "isolated".into(),
                ModelClass::Gauged => "gauged".into(),
            },
            variables: model.table().len(),
            action: model.action().to_string(),
            h_dimension: model.h_basis().len(),
            socle: model.socle_index(),
            ladder: model.ladder_dims(),
        }
    }
}

/// One basis class of the cohomology.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassReport {
    /// Canonical text of the representative.
    pub representative: String,
    /// Ghost number of the class.
    pub ghost: i32,
}

/// One verified identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    /// Identity name.
    pub name: String,
    /// Order it was checked at.
    pub order: usize,
    /// Whether it held exactly.
    pub passed: bool,
}

impl From<&CheckRecord> for CheckReport {
    fn from(r: &CheckRecord) -> Self {
        CheckReport { name: r.name.clone(), order: r.order, passed: r.passed }
    }
}

/// The canonical string key of a word (letters ascending, comma-joined).
pub fn word_key(w: &Word) -> String {
    let letters: Vec<String> = w.letters().iter().map(usize::to_string).collect();
    letters.join(",")
}

fn rat_strings(values: &[Rat]) -> Vec<String> {
    values.iter().map(Rat::to_string).collect()
}

fn poly_strings(p: &HbarScalar) -> Vec<String> {
    rat_strings(p.coeffs())
}

/// A Laurent polynomial in ħ: coefficients starting at `ħ^shift`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaurentReport {
    /// Power of `ħ` carried by the first coefficient.
    pub shift: i64,
    /// Exact coefficients, ascending in the power of `ħ`.
    pub coeffs: Vec<String>,
}

impl From<&HbarLaurent> for LaurentReport {
    fn from(l: &HbarLaurent) -> Self {
        LaurentReport { shift: l.shift(), coeffs: rat_strings(l.coeffs()) }
    }
}

/// Everything the solve command produces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultBundle {
    /// Build identification.
    pub engine: EngineStamp,
    /// Model shape.
    pub model: ModelSummary,
    /// Cohomology basis in index order.
    pub cohomology: Vec<ClassReport>,
    /// Solved order.
    pub order: usize,
    /// `tensors["2"]["1,1"]` = components of `m₂(e₁, e₁)` over the basis.
    pub tensors: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    /// Quantum coordinates: for each basis index γ (as a string key), the
    /// word coefficients of `T^γ`.
    pub quantum_coordinates: BTreeMap<String, BTreeMap<String, LaurentReport>>,
    /// Correlator table under the expectation vector used for the run; each
    /// value is an ħ-polynomial coefficient array.
    pub correlators: BTreeMap<String, Vec<String>>,
    /// The expectation vector the correlators used.
    pub expectation: Vec<String>,
    /// Every identity verified along the way.
    pub checks: Vec<CheckReport>,
    /// Whether the model satisfied the stronger hbar-free witness property
    /// at every solved order.
    pub semiclassical: bool,
}

/// Builds the solve bundle. `data` supplies the correlator-side layers; the
/// expectation vector must have one entry per basis class.
pub fn result_bundle(
    state: &mut MasterState,
    data: &CorrelatorData,
    expectation: &[Rat],
) -> Result<ResultBundle, SolverError> {
    let dim = state.model().h_basis().len();
    let mut tensors = BTreeMap::new();
    for n in 2..=state.order() {
        let mut table = BTreeMap::new();
        for (w, value) in state.structure_tensor(n).entries() {
            table.insert(word_key(w), rat_strings(value));
        }
        tensors.insert(n.to_string(), table);
    }
    let mut quantum = BTreeMap::new();
    for (gamma, coeffs) in data.quantum_coordinates(dim)?.iter().enumerate() {
        let mut table = BTreeMap::new();
        for (w, l) in coeffs {
            table.insert(word_key(w), LaurentReport::from(l));
        }
        quantum.insert(gamma.to_string(), table);
    }
    let mut correlators = BTreeMap::new();
    for (w, value) in data.expectation_table(expectation) {
        correlators.insert(word_key(&w), poly_strings(&value));
    }
    let semiclassical = state.verify_semiclassical();
    let mut checks: Vec<CheckReport> = state.log().iter().map(CheckReport::from).collect();
    checks.extend(data.log().iter().map(CheckReport::from));
    Ok(ResultBundle {
        engine: EngineStamp::current(),
        model: ModelSummary::new(state.model()),
        cohomology: cohomology_report(state.model()),
        order: state.order(),
        tensors,
        quantum_coordinates: quantum,
        correlators,
        expectation: rat_strings(expectation),
        checks,
        semiclassical,
    })
}

/// The basis listing shared by several commands.
pub fn cohomology_report(model: &Model) -> Vec<ClassReport> {
    model
        .h_basis()
        .iter()
        .map(|c| ClassReport { representative: c.repr.to_string(), ghost: c.ghost })
        .collect()
}

/// Output of the ring command.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingReport {
    /// Build identification.
    pub engine: EngineStamp,
    /// Model shape.
    pub model: ModelSummary,
    /// Cohomology basis in index order.
    pub cohomology: Vec<ClassReport>,
    /// Total dimension.
    pub total: usize,
}

impl RingReport {
    /// Reads the report off a built model.
    pub fn new(model: &Model) -> Self {
        RingReport {
            engine: EngineStamp::current(),
            model: ModelSummary::new(model),
            cohomology: cohomology_report(model),
            total: model.h_basis().len(),
        }
    }
}

/// Output of the correlators command.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelatorReport {
    /// Build identification.
    pub engine: EngineStamp,
    /// Model shape.
    pub model: ModelSummary,
    /// Solved order.
    pub order: usize,
    /// Largest word degree listed.
    pub arity: usize,
    /// Expectation vector in force.
    pub expectation: Vec<String>,
    /// `⟨π_w⟩` per word key, as ħ-coefficient arrays; zero values omitted.
    pub table: BTreeMap<String, Vec<String>>,
    /// Whether the independent cross-checks ran.
    pub oracle: bool,
}

/// Builds the correlator table up to the requested arity.
pub fn correlator_report(
    state: &MasterState,
    data: &CorrelatorData,
    expectation: &[Rat],
    arity: usize,
    oracle: bool,
) -> CorrelatorReport {
    let mut table = BTreeMap::new();
    for (w, value) in data.expectation_table(expectation) {
        if w.degree() as usize <= arity {
            table.insert(word_key(&w), poly_strings(&value));
        }
    }
    CorrelatorReport {
        engine: EngineStamp::current(),
        model: ModelSummary::new(state.model()),
        order: state.order(),
        arity,
        expectation: rat_strings(expectation),
        table,
        oracle,
    }
}

/// Output of the verify command: the log alone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// Build identification.
    pub engine: EngineStamp,
    /// Model shape.
    pub model: ModelSummary,
    /// Solved order.
    pub order: usize,
    /// Every identity checked, in execution order.
    pub checks: Vec<CheckReport>,
    /// Whether every check passed.
    pub all_passed: bool,
    /// Whether the model satisfied the hbar-free witness property.
    pub semiclassical: bool,
}

/// One cohomology sector of the tower report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorReport {
    /// Ghost degree of the sector.
    pub ghost: i32,
    /// Cohomology dimension at this ghost degree.
    pub dimension: usize,
    /// Basis (columns) of the subspace killed by every `κ⁽ˡ⁾`.
    pub observables: Vec<Vec<String>>,
    /// Basis (columns) of a complement: classes with an obstruction.
    pub invisibles: Vec<Vec<String>>,
}

/// Output of the obstruction command.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerReport {
    /// Build identification.
    pub engine: EngineStamp,
    /// Truncation order of the input complex.
    pub order: usize,
    /// Sector dimensions of the input complex.
    pub dimensions: Vec<usize>,
    /// Cohomology dimensions per sector.
    pub h_dimensions: Vec<usize>,
    /// `kappa["l"][i]` = matrix of `κ⁽ˡ⁾` out of sector `i` (row-major
    /// rational strings); identically-zero orders are omitted.
    pub kappa: BTreeMap<String, Vec<Vec<Vec<String>>>>,
    /// Observable/invisible split per sector.
    pub sectors: Vec<SectorReport>,
    /// Whether the chain relation between the tower maps holds (always
    /// true for a tower that built successfully; recorded for the report).
    pub chain_relation: bool,
    /// Random gauge transformations sampled and the number that preserved
    /// the tower laws (must equal the sample count).
    pub gauge_samples: usize,
    /// How many samples passed.
    pub gauge_passed: usize,
}

fn mat_strings(m: &bvqft::linalg::Mat) -> Vec<Vec<String>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m.get(r, c).to_string()).collect())
        .collect()
}

/// Builds the tower report (classification plus the κ matrices).
pub fn tower_report(tower: &ObstructionTower, gauge: (usize, usize)) -> TowerReport {
    let cx = tower.complex();
    let mut kappa = BTreeMap::new();
    for l in 1..=tower.order() {
        let mats: Vec<Vec<Vec<String>>> =
            (0..cx.sectors()).map(|i| mat_strings(&tower.kappa_block(l, i))).collect();
        if mats.iter().any(|m| m.iter().any(|row| row.iter().any(|s| s != "0"))) {
            kappa.insert(l.to_string(), mats);
        }
    }
    let sectors = tower
        .classify()
        .iter()
        .map(|s| SectorReport {
            ghost: s.ghost,
            dimension: s.observables.ncols() + s.invisibles.ncols(),
            observables: mat_strings(&s.observables),
            invisibles: mat_strings(&s.invisibles),
        })
        .collect();
    TowerReport {
        engine: EngineStamp::current(),
        order: tower.order(),
        dimensions: (0..cx.sectors()).map(|i| cx.dim(i)).collect(),
        h_dimensions: tower.h_dims(),
        kappa,
        sectors,
        chain_relation: tower.verify_chain_relation(),
        gauge_samples: gauge.0,
        gauge_passed: gauge.1,
    }
}

/// Serializes any report deterministically (pretty JSON, trailing newline).
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports contain only JSON-safe types");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_round_trips_and_is_deterministic() {
        let file = crate::modelfile::parse_model_file(
            r#"
class = "isolated"
action = "1/3 * x^3"

[[variables]]
name = "x"
ghost = 0
partner = "eta"

[[variables]]
name = "eta"
ghost = -1
partner = "x"
"#,
        )
        .unwrap();
        let model = bvqft::model::build_model(file.spec).unwrap();
        let mut state = MasterState::new(model).unwrap();
        state.solve_to(3).unwrap();
        let data = bvqft::correlators::build_correlators(&state).unwrap();
        let mut expectation = vec![Rat::from_integer(0.into()); 2];
        expectation[1] = Rat::from_integer(1.into());

        let bundle = result_bundle(&mut state, &data, &expectation).unwrap();
        let json = to_json(&bundle);
        let back: ResultBundle = serde_json::from_str(&json).unwrap();
        assert_eq!(back, bundle);
        assert_eq!(to_json(&back), json);

        // m₃(e₁,e₁,e₁) = −e₀ shows up under the canonical keys.
        assert_eq!(bundle.tensors["3"]["1,1,1"], vec!["-1", "0"]);
    }
}
