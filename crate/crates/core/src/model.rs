//! Emitters, level structure, dipole transitions and the collective
//! single-excitation state space.
//!
//! Units: `hbar = 1`, energies and rates in a reference rate `Gamma0`,
//! positions in carrier wavelengths. Excited-level energies are detunings
//! from one global carrier frequency; ground-level energies are absolute
//! (Zeeman / hyperfine splittings).

use std::collections::{BTreeMap, HashMap, HashSet};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cvec3, CMat, CVec3};
use crate::media::GreenMediumSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelKind {
    Ground,
    Excited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub label: String,
    pub kind: LevelKind,
    #[serde(rename = "energy_gamma0", default)]
    pub energy: f64,
}

impl Level {
    pub fn ground(label: &str, energy: f64) -> Self {
        Self { label: label.into(), kind: LevelKind::Ground, energy }
    }

    pub fn excited(label: &str, energy: f64) -> Self {
        Self { label: label.into(), kind: LevelKind::Excited, energy }
    }
}

/// A dipole transition `excited <-> ground`.
///
/// `orientation` is the unit direction of the absorption matrix element
/// `<e|d|g>`; `couplings` maps a medium id to the partial decay rate into that
/// medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub excited: String,
    pub ground: String,
    pub orientation: [C64; 3],
    #[serde(rename = "couplings_gamma0")]
    pub couplings: BTreeMap<String, f64>,
}

impl Transition {
    pub fn new(excited: &str, ground: &str, orientation: [C64; 3]) -> Self {
        Self {
            excited: excited.into(),
            ground: ground.into(),
            orientation,
            couplings: BTreeMap::new(),
        }
    }

    pub fn with_coupling(mut self, medium: &str, rate: f64) -> Self {
        self.couplings.insert(medium.into(), rate);
        self
    }

    pub fn rate(&self, medium: &str) -> f64 {
        self.couplings.get(medium).copied().unwrap_or(0.0)
    }

    /// Sum of all partial rates.
    pub fn total_rate(&self) -> f64 {
        self.couplings.values().sum()
    }
}

pub const Z_HAT: [C64; 3] = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
pub const X_HAT: [C64; 3] = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
pub const Y_HAT: [C64; 3] = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSpec {
    pub id: String,
    pub levels: Vec<Level>,
    pub transitions: Vec<Transition>,
    #[serde(rename = "position_wavelengths")]
    pub position: [f64; 3],
}

impl EmitterSpec {
    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.label == label)
    }

    pub fn ground_levels(&self) -> Vec<usize> {
        self.kind_levels(LevelKind::Ground)
    }

    pub fn excited_levels(&self) -> Vec<usize> {
        self.kind_levels(LevelKind::Excited)
    }

    fn kind_levels(&self, kind: LevelKind) -> Vec<usize> {
        (0..self.levels.len()).filter(|&i| self.levels[i].kind == kind).collect()
    }

    /// Index of the declared transition between two level indices.
    pub fn transition_between(&self, excited: usize, ground: usize) -> Option<usize> {
        let e = &self.levels[excited].label;
        let g = &self.levels[ground].label;
        self.transitions.iter().position(|t| &t.excited == e && &t.ground == g)
    }

    /// Two-level emitter `g <-> e` on resonance with the carrier, coupled to
    /// `medium` with rate `rate`.
    pub fn two_level(id: &str, x: f64, medium: &str, rate: f64) -> Self {
        Self {
            id: id.into(),
            levels: vec![Level::ground("g", 0.0), Level::excited("e", 0.0)],
            transitions: vec![Transition::new("e", "g", Z_HAT).with_coupling(medium, rate)],
            position: [x, 0.0, 0.0],
        }
    }
}

/// Light-independent coupling inside the excited manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum HcTerm {
    /// `value |row><col|` on one emitter's excited levels. The assembled
    /// matrix must be Hermitian, so off-diagonal terms need their partner.
    Local {
        emitter: String,
        row: String,
        col: String,
        #[serde(rename = "value_gamma0")]
        value: C64,
    },
    /// Excitation exchange `value |e_a g_b><g_a e_b| + h.c.` between two
    /// emitters (the Hermitian conjugate is added automatically).
    Exchange {
        emitter_a: String,
        excited_a: String,
        ground_a: String,
        emitter_b: String,
        excited_b: String,
        ground_b: String,
        #[serde(rename = "value_gamma0")]
        value: C64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub emitters: Vec<EmitterSpec>,
    pub medium: GreenMediumSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hc_excited: Vec<HcTerm>,
    /// Carrier frequency in units of `Gamma0`. When present, media evaluate
    /// propagation phases at `2 pi (1 + omega / carrier)`; when absent the
    /// wavenumber is frozen at the carrier.
    #[serde(rename = "carrier_frequency_gamma0", default, skip_serializing_if = "Option::is_none")]
    pub carrier_frequency: Option<f64>,
}

/// One validation problem, with a dotted path into the spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecIssue {
    pub path: String,
    pub reason: String,
}

impl SpecIssue {
    fn new(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { path: path.into(), reason: reason.into() }
    }
}

impl SystemSpec {
    pub fn new(emitters: Vec<EmitterSpec>, medium: GreenMediumSpec) -> Self {
        Self { emitters, medium, hc_excited: Vec::new(), carrier_frequency: None }
    }

    pub fn emitter_index(&self, id: &str) -> Option<usize> {
        self.emitters.iter().position(|e| e.id == id)
    }

    /// All structural problems with the spec. Empty means valid.
    pub fn issues(&self) -> Vec<SpecIssue> {
        let mut out = Vec::new();
        if self.emitters.is_empty() {
            out.push(SpecIssue::new("emitters", "at least one emitter is required"));
        }
        out.extend(self.medium.issues("medium"));
        let medium_ids: HashSet<String> = self.medium.members().iter().map(|m| m.id().to_string()).collect();

        let mut ids = HashSet::new();
        for (j, em) in self.emitters.iter().enumerate() {
            let p = format!("emitters[{j}]");
            if !ids.insert(em.id.as_str()) {
                out.push(SpecIssue::new(format!("{p}.id"), format!("duplicate emitter id '{}'", em.id)));
            }
            if em.position.iter().any(|x| !x.is_finite()) {
                out.push(SpecIssue::new(format!("{p}.position_wavelengths"), "non-finite coordinate"));
            }
            let mut labels = HashSet::new();
            for (l, lev) in em.levels.iter().enumerate() {
                if !labels.insert(lev.label.as_str()) {
                    out.push(SpecIssue::new(
                        format!("{p}.levels[{l}].label"),
                        format!("duplicate level label '{}'", lev.label),
                    ));
                }
                if !lev.energy.is_finite() {
                    out.push(SpecIssue::new(format!("{p}.levels[{l}].energy_gamma0"), "non-finite energy"));
                }
            }
            if em.ground_levels().is_empty() {
                out.push(SpecIssue::new(format!("{p}.levels"), "no ground level"));
            }
            if em.excited_levels().is_empty() {
                out.push(SpecIssue::new(format!("{p}.levels"), "no excited level"));
            }
            let mut pairs = HashSet::new();
            for (t, tr) in em.transitions.iter().enumerate() {
                let tp = format!("{p}.transitions[{t}]");
                match em.level_index(&tr.excited).map(|i| em.levels[i].kind) {
                    Some(LevelKind::Excited) => {}
                    Some(LevelKind::Ground) => {
                        out.push(SpecIssue::new(format!("{tp}.excited"), format!("'{}' is a ground level", tr.excited)))
                    }
                    None => out.push(SpecIssue::new(format!("{tp}.excited"), format!("unknown level '{}'", tr.excited))),
                }
                match em.level_index(&tr.ground).map(|i| em.levels[i].kind) {
                    Some(LevelKind::Ground) => {}
                    Some(LevelKind::Excited) => {
                        out.push(SpecIssue::new(format!("{tp}.ground"), format!("'{}' is an excited level", tr.ground)))
                    }
                    None => out.push(SpecIssue::new(format!("{tp}.ground"), format!("unknown level '{}'", tr.ground))),
                }
                if !pairs.insert((tr.excited.as_str(), tr.ground.as_str())) {
                    out.push(SpecIssue::new(tp.clone(), "duplicate (excited, ground) pair"));
                }
                let norm = cvec3(tr.orientation).norm();
                if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
                    out.push(SpecIssue::new(format!("{tp}.orientation"), format!("orientation norm {norm} is not 1")));
                }
                for (ch, &rate) in &tr.couplings {
                    if !rate.is_finite() || rate < 0.0 {
                        out.push(SpecIssue::new(
                            format!("{tp}.couplings_gamma0.{ch}"),
                            format!("partial rate {rate} must be finite and >= 0"),
                        ));
                    }
                    if !medium_ids.contains(ch) {
                        out.push(SpecIssue::new(
                            format!("{tp}.couplings_gamma0.{ch}"),
                            format!("no medium with id '{ch}'"),
                        ));
                    }
                }
            }
        }

        for (k, term) in self.hc_excited.iter().enumerate() {
            let p = format!("hc_excited[{k}]");
            let check = |out: &mut Vec<SpecIssue>, field: &str, em: &str, label: &str, kind: LevelKind| {
                match self.emitter_index(em) {
                    None => out.push(SpecIssue::new(format!("{p}.{field}"), format!("unknown emitter '{em}'"))),
                    Some(j) => match self.emitters[j].level_index(label).map(|i| self.emitters[j].levels[i].kind) {
                        Some(k) if k == kind => {}
                        _ => out.push(SpecIssue::new(
                            format!("{p}.{field}"),
                            format!("'{label}' is not a {kind:?} level of '{em}'").to_lowercase(),
                        )),
                    },
                }
            };
            match term {
                HcTerm::Local { emitter, row, col, value } => {
                    check(&mut out, "row", emitter, row, LevelKind::Excited);
                    check(&mut out, "col", emitter, col, LevelKind::Excited);
                    if !value.re.is_finite() || !value.im.is_finite() {
                        out.push(SpecIssue::new(format!("{p}.value_gamma0"), "non-finite value"));
                    }
                }
                HcTerm::Exchange { emitter_a, excited_a, ground_a, emitter_b, excited_b, ground_b, value } => {
                    check(&mut out, "excited_a", emitter_a, excited_a, LevelKind::Excited);
                    check(&mut out, "ground_a", emitter_a, ground_a, LevelKind::Ground);
                    check(&mut out, "excited_b", emitter_b, excited_b, LevelKind::Excited);
                    check(&mut out, "ground_b", emitter_b, ground_b, LevelKind::Ground);
                    if emitter_a == emitter_b {
                        out.push(SpecIssue::new(format!("{p}.emitter_b"), "exchange needs two distinct emitters"));
                    }
                    if !value.re.is_finite() || !value.im.is_finite() {
                        out.push(SpecIssue::new(format!("{p}.value_gamma0"), "non-finite value"));
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            let msg = issues.iter().map(|i| format!("{}: {}", i.path, i.reason)).collect::<Vec<_>>().join("; ");
            Err(Error::InvalidSpec(msg))
        }
    }
}

/// A collective single-excitation state: emitter `emitter` sits in excited
/// level `config[emitter]`, every other emitter `j` in ground level
/// `config[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExcitedState {
    pub emitter: usize,
    pub config: Vec<usize>,
}

/// A collective transition `excited -> ground` via one declared transition of
/// the excited emitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollectiveTransition {
    pub excited: usize,
    pub ground: usize,
    pub emitter: usize,
    pub transition: usize,
}

/// Enumerated ground manifold and single-excitation manifold.
///
/// Both lists are ordered lexicographically by emitter index, then by level
/// declaration order; excited states are grouped by which emitter is excited.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldBasis {
    pub ground_states: Vec<Vec<usize>>,
    pub excited_states: Vec<ExcitedState>,
    ground_index: HashMap<Vec<usize>, usize>,
    excited_index: HashMap<(usize, Vec<usize>), usize>,
    transitions: Vec<CollectiveTransition>,
    lowerings: Vec<Vec<usize>>,
}

impl ManifoldBasis {
    pub fn n_ground(&self) -> usize {
        self.ground_states.len()
    }

    pub fn n_excited(&self) -> usize {
        self.excited_states.len()
    }

    pub fn ground_index(&self, config: &[usize]) -> Option<usize> {
        self.ground_index.get(config).copied()
    }

    pub fn excited_index(&self, emitter: usize, config: &[usize]) -> Option<usize> {
        self.excited_index.get(&(emitter, config.to_vec())).copied()
    }

    /// All collective transitions, ordered by excited index then ground index.
    pub fn transitions(&self) -> &[CollectiveTransition] {
        &self.transitions
    }

    /// Indices into [`Self::transitions`] leaving excited state `e`.
    pub fn lowerings(&self, e: usize) -> &[usize] {
        &self.lowerings[e]
    }

    /// Human-readable label such as `g,g1` for a ground state.
    pub fn ground_label(&self, spec: &SystemSpec, g: usize) -> String {
        label_config(spec, &self.ground_states[g])
    }

    pub fn excited_label(&self, spec: &SystemSpec, e: usize) -> String {
        label_config(spec, &self.excited_states[e].config)
    }

    /// Diagonal ground energies `E_g = sum_j E(g_j)`.
    pub fn ground_energies(&self, spec: &SystemSpec) -> Vec<f64> {
        self.ground_states.iter().map(|cfg| config_energy(spec, cfg)).collect()
    }

    /// Bare energies of the excited states (excited detuning plus spectator
    /// ground energies).
    pub fn excited_energies(&self, spec: &SystemSpec) -> Vec<f64> {
        self.excited_states.iter().map(|s| config_energy(spec, &s.config)).collect()
    }
}

fn config_energy(spec: &SystemSpec, cfg: &[usize]) -> f64 {
    cfg.iter().enumerate().map(|(j, &l)| spec.emitters[j].levels[l].energy).sum()
}

fn label_config(spec: &SystemSpec, cfg: &[usize]) -> String {
    cfg.iter()
        .enumerate()
        .map(|(j, &l)| spec.emitters[j].levels[l].label.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

fn cartesian(choices: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(choices.len())];
    for options in choices {
        let mut next = Vec::with_capacity(out.len() * options.len());
        for prefix in &out {
            for &o in options {
                let mut v = prefix.clone();
                v.push(o);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Enumerate the collective ground and single-excitation manifolds.
pub fn build_manifolds(spec: &SystemSpec) -> Result<ManifoldBasis> {
    for (j, em) in spec.emitters.iter().enumerate() {
        if em.ground_levels().is_empty() || em.excited_levels().is_empty() {
            return Err(Error::InvalidSpec(format!("emitters[{j}] ('{}') needs ground and excited levels", em.id)));
        }
    }
    if spec.emitters.is_empty() {
        return Err(Error::InvalidSpec("no emitters".into()));
    }
    let grounds: Vec<Vec<usize>> = spec.emitters.iter().map(|e| e.ground_levels()).collect();
    let ground_states = cartesian(&grounds);
    let ground_index = ground_states.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();

    let mut excited_states = Vec::new();
    for (j, em) in spec.emitters.iter().enumerate() {
        for ex in em.excited_levels() {
            let mut choices = grounds.clone();
            choices[j] = vec![ex];
            for config in cartesian(&choices) {
                excited_states.push(ExcitedState { emitter: j, config });
            }
        }
    }
    let excited_index: HashMap<(usize, Vec<usize>), usize> =
        excited_states.iter().enumerate().map(|(i, s)| ((s.emitter, s.config.clone()), i)).collect();

    let mut transitions = Vec::new();
    let mut lowerings = vec![Vec::new(); excited_states.len()];
    for (e, st) in excited_states.iter().enumerate() {
        let j = st.emitter;
        let em = &spec.emitters[j];
        for gl in em.ground_levels() {
            if let Some(t) = em.transition_between(st.config[j], gl) {
                let mut cfg = st.config.clone();
                cfg[j] = gl;
                let g = ground_states.iter().position(|c| *c == cfg).expect("ground config enumerated");
                lowerings[e].push(transitions.len());
                transitions.push(CollectiveTransition { excited: e, ground: g, emitter: j, transition: t });
            }
        }
    }

    Ok(ManifoldBasis { ground_states, excited_states, ground_index, excited_index, transitions, lowerings })
}

/// Dipole element `sqrt(Gamma_ch) * orientation` of emitter `j` between
/// collective states `e` and `g`, or the zero vector when they are not
/// connected by a declared transition of `j` alone.
pub fn collective_dipole(
    spec: &SystemSpec,
    basis: &ManifoldBasis,
    e: usize,
    g: usize,
    j: usize,
    channel: &str,
) -> CVec3 {
    let zero = CVec3::zeros();
    let st = &basis.excited_states[e];
    if st.emitter != j {
        return zero;
    }
    let gcfg = &basis.ground_states[g];
    if st.config.iter().zip(gcfg).enumerate().any(|(k, (a, b))| k != j && a != b) {
        return zero;
    }
    let em = &spec.emitters[j];
    match em.transition_between(st.config[j], gcfg[j]) {
        Some(t) => {
            let tr = &em.transitions[t];
            cvec3(tr.orientation) * C64::from(tr.rate(channel).sqrt())
        }
        None => zero,
    }
}

/// Assemble the light-independent excited-manifold Hamiltonian: bare
/// energies on the diagonal plus the declared [`HcTerm`]s.
pub fn excited_hamiltonian(spec: &SystemSpec, basis: &ManifoldBasis) -> Result<CMat> {
    let n = basis.n_excited();
    let mut h = CMat::zeros(n, n);
    for (e, en) in basis.excited_energies(spec).into_iter().enumerate() {
        h[(e, e)] += C64::from(en);
    }
    let level = |em: &str, label: &str| -> Result<(usize, usize)> {
        let j = spec.emitter_index(em).ok_or_else(|| Error::InvalidSpec(format!("unknown emitter '{em}'")))?;
        let l = spec.emitters[j]
            .level_index(label)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown level '{label}' on '{em}'")))?;
        Ok((j, l))
    };
    for term in &spec.hc_excited {
        match term {
            HcTerm::Local { emitter, row, col, value } => {
                let (j, r) = level(emitter, row)?;
                let (_, cl) = level(emitter, col)?;
                for (e, st) in basis.excited_states.iter().enumerate() {
                    if st.emitter == j && st.config[j] == cl {
                        let mut cfg = st.config.clone();
                        cfg[j] = r;
                        if let Some(e2) = basis.excited_index(j, &cfg) {
                            h[(e2, e)] += *value;
                        }
                    }
                }
            }
            HcTerm::Exchange { emitter_a, excited_a, ground_a, emitter_b, excited_b, ground_b, value } => {
                let (a, ea) = level(emitter_a, excited_a)?;
                let (_, ga) = level(emitter_a, ground_a)?;
                let (b, eb) = level(emitter_b, excited_b)?;
                let (_, gb) = level(emitter_b, ground_b)?;
                for (e, st) in basis.excited_states.iter().enumerate() {
                    if st.emitter == b && st.config[b] == eb && st.config[a] == ga {
                        let mut cfg = st.config.clone();
                        cfg[a] = ea;
                        cfg[b] = gb;
                        if let Some(e2) = basis.excited_index(a, &cfg) {
                            h[(e2, e)] += *value;
                            h[(e, e2)] += value.conj();
                        }
                    }
                }
            }
        }
    }
    Ok(h)
}
