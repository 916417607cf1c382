//! The panel-level pollinator DBN.
//!
//! Ten binary variables: weather, disease and pest pressure, pesticide use,
//! land use fragmentation, social attitudes, food supply, environment and
//! three abundance groups. Disease pressure and the abundances carry a
//! one-year self-loop. A handful of entries are fixed by the published
//! construction rules; the rest are free parameters fitted by
//! [`calibrate`].

mod anchors;
mod calibration;

pub use anchors::{published_anchors, Anchor, AnchorKind, AnchorSet, Query, Relation};
pub use calibration::{
    calibrate, fit, fit_from, CalibratedModel, CalibrationOptions, Evaluator, FitReport, ParameterReport, ResidualRow,
};

use serde::{Deserialize, Serialize};

use crate::analytics::UtilitySpec;
use crate::document::{LoadedModel, ModelDocument};
use crate::error::Result;
use crate::intervention::{Intervention, Scenario};
use crate::network::NetworkBuilder;
use crate::temporal::TwoSliceDbn;

pub const WEATHER: &str = "Weather";
pub const DISEASE: &str = "DiseasePestPressure";
pub const PESTICIDE: &str = "PesticideUse";
pub const LAND_USE: &str = "LandUseFragmentation";
pub const SOCIAL: &str = "SocialAttitudes";
pub const FOOD: &str = "FoodSupply";
pub const ENVIRONMENT: &str = "Environment";
pub const HONEYBEE: &str = "HoneybeeAbundance";
pub const OTHER_BEES: &str = "OtherBeesAbundance";
pub const OTHER_POLLINATORS: &str = "OtherPollinatorsAbundance";

/// The three utility targets, in reporting order.
pub const ABUNDANCES: [&str; 3] = [HONEYBEE, OTHER_BEES, OTHER_POLLINATORS];

const BINARY_STATES: [(&str, [&str; 2]); 10] = [
    (WEATHER, ["Average", "Unusual"]),
    (DISEASE, ["High", "Low"]),
    (PESTICIDE, ["High", "Low"]),
    (LAND_USE, ["High", "Low"]),
    (SOCIAL, ["Supportive", "Unsupportive"]),
    (FOOD, ["Good", "Poor"]),
    (ENVIRONMENT, ["Supportive", "Unsupportive"]),
    (HONEYBEE, ["Good", "Poor"]),
    (OTHER_BEES, ["Good", "Poor"]),
    (OTHER_POLLINATORS, ["Good", "Poor"]),
];

/// Variables, intra-slice edges and one-slice temporal edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub variables: Vec<(String, Vec<String>)>,
    pub intra_edges: Vec<(String, String)>,
    pub temporal_edges: Vec<(String, String)>,
}

impl PanelSpec {
    /// Same-slice parents of `child`, in CPT order.
    pub fn parents(&self, child: &str) -> Vec<&str> {
        self.intra_edges
            .iter()
            .filter(|(_, c)| c == child)
            .map(|(p, _)| p.as_str())
            .collect()
    }

    pub fn states(&self, variable: &str) -> Option<&[String]> {
        self.variables
            .iter()
            .find(|(n, _)| n == variable)
            .map(|(_, s)| s.as_slice())
    }
}

pub fn build_structure() -> PanelSpec {
    let e = |a: &str, b: &str| (a.to_string(), b.to_string());
    PanelSpec {
        variables: BINARY_STATES
            .iter()
            .map(|(n, s)| (n.to_string(), s.iter().map(|x| x.to_string()).collect()))
            .collect(),
        // Order within a child is its CPT parent order.
        intra_edges: vec![
            e(WEATHER, DISEASE),
            e(WEATHER, PESTICIDE),
            e(SOCIAL, FOOD),
            e(WEATHER, FOOD),
            e(PESTICIDE, ENVIRONMENT),
            e(LAND_USE, ENVIRONMENT),
            e(FOOD, ENVIRONMENT),
            e(ENVIRONMENT, HONEYBEE),
            e(DISEASE, HONEYBEE),
            e(ENVIRONMENT, OTHER_BEES),
            e(ENVIRONMENT, OTHER_POLLINATORS),
        ],
        temporal_edges: vec![
            e(DISEASE, DISEASE),
            e(HONEYBEE, HONEYBEE),
            e(OTHER_BEES, OTHER_BEES),
            e(OTHER_POLLINATORS, OTHER_POLLINATORS),
        ],
    }
}

/// Entries stated exactly by the model's construction rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedParameters {
    /// P(Average), P(Unusual).
    pub weather: [f64; 2],
    /// P(Environment = Supportive) by number of supportive inputs (0..=3).
    pub environment_by_support: [f64; 4],
    /// Additive rise in P(High) under unusual weather, for disease
    /// pressure and pesticide use.
    pub unusual_weather_shift: f64,
    /// Additive rise in the probability of repeating last year's disease
    /// pressure state.
    pub persistence_shift: f64,
}

pub fn fixed_parameters() -> FixedParameters {
    FixedParameters {
        weather: [0.62, 0.38],
        environment_by_support: [0.05, 0.2, 0.4, 0.8],
        unusual_weather_shift: 0.1,
        persistence_shift: 0.1,
    }
}

impl FixedParameters {
    /// Environment CPT over (PesticideUse, LandUseFragmentation, FoodSupply).
    pub fn environment_table(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(16);
        for pest_low in [false, true] {
            for land_low in [false, true] {
                for food_good in [true, false] {
                    let k = usize::from(pest_low) + usize::from(land_low) + usize::from(food_good);
                    let p = self.environment_by_support[k];
                    t.extend([p, 1.0 - p]);
                }
            }
        }
        t
    }
}

/// A free CPT entry: always the probability of the child's first state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeParameter {
    pub name: &'static str,
    pub lower: f64,
    pub upper: f64,
}

const fn free(name: &'static str) -> FreeParameter {
    FreeParameter {
        name,
        lower: 0.001,
        upper: 0.999,
    }
}

/// Free parameters in vector order. Conditioning states are written
/// `Variable=State`; `prev` marks the previous slice.
pub const FREE_PARAMETERS: [FreeParameter; 32] = [
    FreeParameter {
        name: "PesticideUse=High | Weather=Average",
        lower: 0.001,
        upper: 0.899,
    },
    FreeParameter {
        name: "DiseasePestPressure=High | Weather=Average",
        lower: 0.001,
        upper: 0.899,
    },
    free("LandUseFragmentation=High"),
    free("SocialAttitudes=Supportive"),
    free("FoodSupply=Good | SocialAttitudes=Supportive, Weather=Average"),
    free("FoodSupply=Good | SocialAttitudes=Supportive, Weather=Unusual"),
    free("FoodSupply=Good | SocialAttitudes=Unsupportive, Weather=Average"),
    free("FoodSupply=Good | SocialAttitudes=Unsupportive, Weather=Unusual"),
    free("HoneybeeAbundance=Good | Environment=Supportive, DiseasePestPressure=High [slice 1]"),
    free("HoneybeeAbundance=Good | Environment=Supportive, DiseasePestPressure=Low [slice 1]"),
    free("HoneybeeAbundance=Good | Environment=Unsupportive, DiseasePestPressure=High [slice 1]"),
    free("HoneybeeAbundance=Good | Environment=Unsupportive, DiseasePestPressure=Low [slice 1]"),
    free("HoneybeeAbundance=Good | Environment=Supportive, DiseasePestPressure=High, prev=Good"),
    free("HoneybeeAbundance=Good | Environment=Supportive, DiseasePestPressure=High, prev=Poor"),
    free("HoneybeeAbundance=Good | Environment=Supportive, DiseasePestPressure=Low, prev=Good"),
    free("HoneybeeAbundance=Good | Environment=Supportive, DiseasePestPressure=Low, prev=Poor"),
    free("HoneybeeAbundance=Good | Environment=Unsupportive, DiseasePestPressure=High, prev=Good"),
    free("HoneybeeAbundance=Good | Environment=Unsupportive, DiseasePestPressure=High, prev=Poor"),
    free("HoneybeeAbundance=Good | Environment=Unsupportive, DiseasePestPressure=Low, prev=Good"),
    free("HoneybeeAbundance=Good | Environment=Unsupportive, DiseasePestPressure=Low, prev=Poor"),
    free("OtherBeesAbundance=Good | Environment=Supportive [slice 1]"),
    free("OtherBeesAbundance=Good | Environment=Unsupportive [slice 1]"),
    free("OtherBeesAbundance=Good | Environment=Supportive, prev=Good"),
    free("OtherBeesAbundance=Good | Environment=Supportive, prev=Poor"),
    free("OtherBeesAbundance=Good | Environment=Unsupportive, prev=Good"),
    free("OtherBeesAbundance=Good | Environment=Unsupportive, prev=Poor"),
    free("OtherPollinatorsAbundance=Good | Environment=Supportive [slice 1]"),
    free("OtherPollinatorsAbundance=Good | Environment=Unsupportive [slice 1]"),
    free("OtherPollinatorsAbundance=Good | Environment=Supportive, prev=Good"),
    free("OtherPollinatorsAbundance=Good | Environment=Supportive, prev=Poor"),
    free("OtherPollinatorsAbundance=Good | Environment=Unsupportive, prev=Good"),
    free("OtherPollinatorsAbundance=Good | Environment=Unsupportive, prev=Poor"),
];

/// Hand-set starting point for calibration, read off the published
/// marginals and the usual ordering of abundance by environment quality.
pub fn initial_guess() -> Vec<f64> {
    vec![
        0.70, 0.55, 0.27, 0.60, //
        0.75, 0.50, 0.45, 0.30, //
        0.20, 0.59, 0.05, 0.30, //
        0.25, 0.15, 0.62, 0.55, 0.08, 0.04, 0.35, 0.28, //
        0.56, 0.15, 0.60, 0.54, 0.20, 0.14, //
        0.57, 0.17, 0.61, 0.55, 0.22, 0.16,
    ]
}

fn binary(p: f64) -> [f64; 2] {
    let p = p.clamp(0.0, 1.0);
    [p, 1.0 - p]
}

fn rows(ps: &[f64]) -> Vec<f64> {
    ps.iter().flat_map(|&p| binary(p)).collect()
}

/// Build the DBN from the fixed entries and a free-parameter vector laid
/// out as [`FREE_PARAMETERS`].
pub fn assemble(fixed: &FixedParameters, theta: &[f64]) -> Result<TwoSliceDbn> {
    assert_eq!(
        theta.len(),
        FREE_PARAMETERS.len(),
        "free-parameter vector has wrong length"
    );
    let spec = build_structure();
    let states = |v: &str| -> Vec<&str> {
        spec.states(v)
            .expect("panel variable")
            .iter()
            .map(String::as_str)
            .collect()
    };
    let shift = fixed.unusual_weather_shift;
    let persist = fixed.persistence_shift;
    let (pest, disease) = (theta[0], theta[1]);

    let slice1: Vec<(&str, Vec<f64>)> = vec![
        (WEATHER, fixed.weather.to_vec()),
        (DISEASE, rows(&[disease, disease + shift])),
        (PESTICIDE, rows(&[pest, pest + shift])),
        (LAND_USE, rows(&[theta[2]])),
        (SOCIAL, rows(&[theta[3]])),
        (FOOD, rows(&theta[4..8])),
        (ENVIRONMENT, fixed.environment_table()),
        (HONEYBEE, rows(&theta[8..12])),
        (OTHER_BEES, rows(&theta[20..22])),
        (OTHER_POLLINATORS, rows(&theta[26..28])),
    ];
    let mut b = NetworkBuilder::new();
    for (name, table) in &slice1 {
        b.node(name, &states(name), spec.parents(name), table.clone());
    }
    let initial = b.build()?;

    let lag0 = |v: &str| -> Vec<(String, u8)> { spec.parents(v).into_iter().map(|p| (p.to_string(), 0)).collect() };
    let with_self = |v: &str| -> Vec<(String, u8)> {
        let mut p = lag0(v);
        p.push((v.to_string(), 1));
        p
    };
    let mut transition = Vec::new();
    for (name, table) in &slice1 {
        let entry = match *name {
            DISEASE => (
                with_self(DISEASE),
                rows(&[
                    disease + persist,
                    disease - persist,
                    disease + shift + persist,
                    disease + shift - persist,
                ]),
            ),
            HONEYBEE => (with_self(HONEYBEE), rows(&theta[12..20])),
            OTHER_BEES => (with_self(OTHER_BEES), rows(&theta[22..26])),
            OTHER_POLLINATORS => (with_self(OTHER_POLLINATORS), rows(&theta[28..32])),
            _ => (lag0(name), table.clone()),
        };
        transition.push((name.to_string(), entry.0, entry.1));
    }
    TwoSliceDbn::new(initial, transition)
}

/// Equal-weight linear utility over the three abundance groups, 0–100.
pub fn default_utility() -> UtilitySpec {
    UtilitySpec::equal_weights(&[
        ("honeybee", HONEYBEE, "Good"),
        ("otherbees", OTHER_BEES, "Good"),
        ("otherpollinators", OTHER_POLLINATORS, "Good"),
    ])
    .expect("static utility spec is valid")
}

/// The published policy and event scenarios over a 10-year horizon,
/// including the no-intervention baseline.
pub fn published_scenarios() -> Vec<Scenario> {
    let described = |name: &str, description: &str, interventions| Scenario {
        name: name.into(),
        description: description.into(),
        interventions,
    };
    vec![
        described("baseline", "No change", vec![]),
        described(
            "1a",
            "Pesticide use Low for one year",
            vec![Intervention::fix(PESTICIDE, "Low", 1, 1)],
        ),
        described(
            "1b",
            "Pesticide use Low for five years",
            vec![Intervention::fix(PESTICIDE, "Low", 1, 5)],
        ),
        described(
            "1c",
            "Pesticide use Low for ten years",
            vec![Intervention::fix(PESTICIDE, "Low", 1, 10)],
        ),
        described(
            "2",
            "Supportive social attitudes and low land use fragmentation",
            vec![
                Intervention::fix(SOCIAL, "Supportive", 1, 10),
                Intervention::fix(LAND_USE, "Low", 1, 10),
            ],
        ),
        described(
            "3",
            "Low disease and pest pressure",
            vec![Intervention::fix(DISEASE, "Low", 1, 10)],
        ),
        described(
            "4",
            "Low pesticide use and low disease and pest pressure",
            vec![
                Intervention::fix(PESTICIDE, "Low", 1, 10),
                Intervention::fix(DISEASE, "Low", 1, 10),
            ],
        ),
        described(
            "5",
            "Unusual weather becomes more frequent",
            vec![Intervention::prior(WEATHER, vec![0.43, 0.57], 1, 10)],
        ),
    ]
}

/// The calibrated model shipped with the crate.
pub const BUNDLED_MODEL_JSON: &str = include_str!("../../models/pollinator.json");

pub fn bundled_model() -> Result<LoadedModel> {
    LoadedModel::parse(BUNDLED_MODEL_JSON)
}

fn provenance() -> std::collections::BTreeMap<String, String> {
    [
        (
            WEATHER,
            "fixed: Average 62% of years, Unusual 38% (decade of Met Office data)",
        ),
        (
            DISEASE,
            "form fixed (+0.1 under Unusual weather, +0.1 for repeating last year's state); base level calibrated",
        ),
        (
            PESTICIDE,
            "form fixed (+0.1 High under Unusual weather); base level calibrated",
        ),
        (LAND_USE, "calibrated"),
        (SOCIAL, "calibrated"),
        (FOOD, "calibrated; no published entries"),
        (
            ENVIRONMENT,
            "fixed: P(Supportive) = 0.8 / 0.4 / 0.2 / 0.05 for 3 / 2 / 1 / 0 supportive inputs",
        ),
        (
            HONEYBEE,
            "calibrated to published scenario marginals and utility trajectories",
        ),
        (
            OTHER_BEES,
            "calibrated to published scenario marginals and utility trajectories",
        ),
        (
            OTHER_POLLINATORS,
            "calibrated to published scenario marginals and utility trajectories",
        ),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// Model document for a calibrated model, fit report included.
pub fn export_model(model: &CalibratedModel) -> Result<ModelDocument> {
    let mut doc = ModelDocument::from_dbn("pollinator-panel-dbn", &model.dbn);
    doc.description = "Panel-level pollinator DBN: weather, disease and pest pressure, pesticide use, \
                       land use fragmentation, social attitudes, food supply, environment and three abundance groups; \
                       one slice per year."
        .into();
    doc.utility = Some(default_utility());
    doc.metadata.provenance = provenance();
    doc.metadata.notes = model.report.notes.clone();
    doc.metadata.calibration = Some(serde_json::to_value(&model.report)?);
    Ok(doc)
}

/// Published utility scores per scenario and year.
pub const PUBLISHED_UTILITIES: [(&str, [f64; 10]); 8] = [
    (
        "baseline",
        [24.63, 24.43, 24.40, 24.37, 24.37, 24.37, 24.37, 24.37, 24.37, 24.37],
    ),
    (
        "1a",
        [30.20, 25.57, 24.63, 24.43, 24.40, 24.37, 24.37, 24.37, 24.37, 24.37],
    ),
    (
        "1b",
        [30.20, 31.13, 31.27, 31.33, 31.33, 25.7, 24.67, 24.43, 24.40, 24.37],
    ),
    (
        "1c",
        [30.20, 31.13, 31.27, 31.33, 31.33, 31.33, 31.33, 31.33, 31.33, 31.33],
    ),
    (
        "2",
        [27.00, 27.30, 27.33, 27.33, 27.33, 27.33, 27.33, 27.33, 27.33, 27.33],
    ),
    (
        "3",
        [32.50, 33.50, 33.73, 33.73, 33.77, 33.77, 33.77, 33.77, 33.77, 33.77],
    ),
    (
        "4",
        [38.8, 41.10, 41.5, 41.63, 41.63, 41.63, 41.63, 41.63, 41.63, 41.63],
    ),
    (
        "5",
        [23.83, 23.40, 23.33, 23.30, 23.30, 23.30, 23.30, 23.30, 23.30, 23.30],
    ),
];
