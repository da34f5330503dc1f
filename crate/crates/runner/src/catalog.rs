//! Probe-set builders, one per experiment.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};
use srcpref_core::conflict::ConflictPair;
use srcpref_core::entity::EntityType;
use srcpref_core::lexicon::AgeGroup;
use srcpref_core::metrics::PairProbes;
use srcpref_core::prompt::{
    build_conflict_probe, build_prompted_preference_probe, build_recognizability_probe, build_table_format_probe,
    AnswerTokens, ContextSpec, InstructionVariant, Layout, ProbeInstance, ProbeOrder,
};
use srcpref_core::rng::{substream, StreamRng};
use srcpref_core::sources::{
    age_contrast, augment_popularity, gender_contrast, regional_newspapers, title_contrast, username_contrast, Band,
    SourceSampler, SourceSpec, SourceType, UsernameStyle,
};

use crate::config::RunConfig;
use crate::data::{sample_pairs, Inputs};
use crate::error::{Result, RunnerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    Attribution,
    InterType,
    Popularity,
    Sociodemographic,
    PromptedPreference,
    MajorityRepetition,
    CredibilityPrompting,
    Validation,
    PromptStability,
    UserVsAi,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Attribution,
        Experiment::InterType,
        Experiment::Popularity,
        Experiment::Sociodemographic,
        Experiment::PromptedPreference,
        Experiment::MajorityRepetition,
        Experiment::CredibilityPrompting,
        Experiment::Validation,
        Experiment::PromptStability,
        Experiment::UserVsAi,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Attribution => "attribution",
            Experiment::InterType => "inter_type",
            Experiment::Popularity => "popularity",
            Experiment::Sociodemographic => "sociodemographic",
            Experiment::PromptedPreference => "prompted_preference",
            Experiment::MajorityRepetition => "majority_repetition",
            Experiment::CredibilityPrompting => "credibility_prompting",
            Experiment::Validation => "validation",
            Experiment::PromptStability => "prompt_stability",
            Experiment::UserVsAi => "user_vs_ai",
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Instruction wording and answer tokens shared by a block of probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Setting {
    pub instruction_variant: InstructionVariant,
    pub answer_tokens: AnswerTokens,
}

impl Setting {
    pub fn new(instruction_variant: InstructionVariant, answer_tokens: AnswerTokens) -> Self {
        Self { instruction_variant, answer_tokens }
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.instruction_variant, self.answer_tokens.as_str())
    }
}

/// A pair of source conditions compared on every conflict pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contrast {
    /// Two attributed source types.
    Inter(SourceType, SourceType),
    /// One attributed type against no source.
    Attributed(SourceType),
    /// High against low popularity within a type.
    Popularity(SourceType),
    Regional,
    Title,
    Gender,
    Age(AgeGroup, AgeGroup),
    Username,
    UserAi,
}

impl Contrast {
    pub fn inter_matchups() -> Vec<Contrast> {
        let t = SourceType::INTER;
        let mut out = Vec::new();
        for i in 0..t.len() {
            for j in i + 1..t.len() {
                out.push(Contrast::Inter(t[i], t[j]));
            }
        }
        out
    }

    pub fn attributed() -> Vec<Contrast> {
        SourceType::INTER.into_iter().map(Contrast::Attributed).collect()
    }

    pub fn popularity() -> Vec<Contrast> {
        vec![Contrast::Popularity(SourceType::Newspaper), Contrast::Popularity(SourceType::SocialMedia)]
    }

    pub fn sociodemographic() -> Vec<Contrast> {
        vec![
            Contrast::Regional,
            Contrast::Title,
            Contrast::Gender,
            Contrast::Age(AgeGroup::Old, AgeGroup::Middle),
            Contrast::Age(AgeGroup::Old, AgeGroup::Young),
            Contrast::Age(AgeGroup::Middle, AgeGroup::Young),
            Contrast::Username,
        ]
    }

    /// Every contrast that can be asked about without context.
    pub fn prompted() -> Vec<Contrast> {
        let mut out = Self::inter_matchups();
        out.extend(Self::popularity());
        out.extend(Self::sociodemographic().into_iter().filter(|c| *c != Contrast::Regional));
        out.push(Contrast::UserAi);
        out
    }

    /// (x, y) labels; x is the right-hand-side condition carried by table A.
    pub fn labels(&self) -> (String, String) {
        let s = |a: &str, b: &str| (a.to_string(), b.to_string());
        match self {
            Contrast::Inter(a, b) => s(a.as_str(), b.as_str()),
            Contrast::Attributed(a) => s(a.as_str(), SourceType::None.as_str()),
            Contrast::Popularity(SourceType::Newspaper) => s("newspaper_high_circulation", "newspaper_low_circulation"),
            Contrast::Popularity(t) => (format!("{t}_high_followers"), format!("{t}_low_followers")),
            Contrast::Regional => s("newspaper_regional", "newspaper_non_regional"),
            Contrast::Title => s("person_academic_title", "person_courtesy_title"),
            Contrast::Gender => s("person_female", "person_male"),
            Contrast::Age(a, b) => (format!("person_{}", a.as_str()), format!("person_{}", b.as_str())),
            Contrast::Username => s("social_media_traditional", "social_media_internet"),
            Contrast::UserAi => s(SourceType::UserRole.as_str(), SourceType::AiRole.as_str()),
        }
    }

    /// Draws the two sources, possibly adjusting the pair (regionality may
    /// insert a location row).
    pub fn draw(
        &self,
        sampler: &SourceSampler<'_>,
        pair: Option<&ConflictPair>,
        entity_type: EntityType,
        location_match: f64,
        rng: &mut StreamRng,
    ) -> Result<(Option<ConflictPair>, SourceSpec, SourceSpec)> {
        let keep = pair.cloned();
        let (x, y) = match *self {
            Contrast::Inter(a, b) => sampler.sample_distinct(a, b, entity_type, rng)?,
            Contrast::Attributed(a) => (sampler.sample(a, entity_type, rng)?, SourceSpec::none()),
            Contrast::Popularity(t) => {
                let (a, b) = sampler.sample_distinct(t, t, entity_type, rng)?;
                (augment_popularity(&a, Band::High, rng)?, augment_popularity(&b, Band::Low, rng)?)
            }
            Contrast::Regional => {
                let pair = pair.ok_or_else(|| RunnerError::Config("regionality needs a conflict pair".into()))?;
                let (p, regional, distant) = regional_newspapers(pair, sampler.lexicon, location_match, rng)?;
                return Ok((Some(p), regional, distant));
            }
            Contrast::Title => title_contrast(sampler, rng)?,
            Contrast::Gender => {
                let cohort = *AgeGroup::ALL.choose(rng).expect("non-empty");
                gender_contrast(sampler, cohort, rng)?
            }
            Contrast::Age(older, younger) => age_contrast(sampler, older, younger, rng)?,
            Contrast::Username => {
                let style = *[UsernameStyle::Underscore, UsernameStyle::Camel].choose(rng).expect("non-empty");
                username_contrast(sampler, style, rng)?
            }
            Contrast::UserAi => (SourceSpec::user_role(), SourceSpec::ai_role()),
        };
        Ok((keep, x, y))
    }
}

/// One results-table row in the making: a source matchup under one layout
/// and setting, with the attributed and unattributed probes of every pair.
#[derive(Debug, Clone)]
pub struct Matchup {
    /// Holm family within a model.
    pub panel: String,
    pub x: String,
    pub y: String,
    pub layout: Layout,
    pub setting: Setting,
    pub pairs: Vec<PairProbes>,
    /// Index of the matchup measuring the same sources without repetition or
    /// majority.
    pub baseline: Option<usize>,
}

/// Context-free credibility questions for one contrast. Each group holds the
/// two orders of one source pair.
#[derive(Debug, Clone)]
pub struct PromptedContrast {
    pub panel: String,
    pub x: String,
    pub y: String,
    pub setting: Setting,
    pub groups: Vec<Vec<ProbeInstance>>,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationProbes {
    pub recognizability: Vec<ProbeInstance>,
    pub table_format: Vec<ProbeInstance>,
    pub instruction_following: Vec<ProbeInstance>,
    /// Unattributed probes of every pair, both orders; side B is the
    /// perturbed value.
    pub plausibility: Vec<Vec<ProbeInstance>>,
}

#[derive(Debug, Clone)]
pub struct ProbeSet {
    pub experiment: Experiment,
    pub matchups: Vec<Matchup>,
    pub prompted: Vec<PromptedContrast>,
    pub validation: Option<ValidationProbes>,
}

fn push_unique<'a>(seen: &mut HashSet<&'a str>, out: &mut Vec<&'a ProbeInstance>, p: &'a ProbeInstance) {
    if seen.insert(p.probe_id.as_str()) {
        out.push(p);
    }
}

impl ProbeSet {
    /// Every distinct probe in build order.
    pub fn probes(&self) -> Vec<ProbeInstance> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for m in &self.matchups {
            for p in &m.pairs {
                for probe in p.attributed.iter().chain(&p.unattributed) {
                    push_unique(&mut seen, &mut out, probe);
                }
            }
        }
        for c in &self.prompted {
            for probe in c.groups.iter().flatten() {
                push_unique(&mut seen, &mut out, probe);
            }
        }
        if let Some(v) = &self.validation {
            for probe in v.recognizability.iter().chain(&v.table_format).chain(v.plausibility.iter().flatten()) {
                push_unique(&mut seen, &mut out, probe);
            }
        }
        out.into_iter().cloned().collect()
    }

    /// Distinct unattributed pair-layout probes, used for position bias.
    pub fn unattributed_probes(&self) -> Vec<ProbeInstance> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for m in &self.matchups {
            for probe in m.pairs.iter().flat_map(|p| &p.unattributed) {
                push_unique(&mut seen, &mut out, probe);
            }
        }
        if let Some(v) = &self.validation {
            for probe in v.plausibility.iter().flatten() {
                push_unique(&mut seen, &mut out, probe);
            }
        }
        out.into_iter().cloned().collect()
    }

    /// Attributed probes built, counted per matchup row.
    pub fn attributed_count(&self) -> usize {
        self.matchups.iter().flat_map(|m| &m.pairs).map(|p| p.attributed.len()).sum()
    }
}

pub struct Builder<'a> {
    pub inputs: &'a Inputs,
    pub config: &'a RunConfig,
    sampler: SourceSampler<'a>,
}

impl<'a> Builder<'a> {
    pub fn new(inputs: &'a Inputs, config: &'a RunConfig) -> Self {
        Self { inputs, config, sampler: SourceSampler::new(&inputs.lexicon) }
    }

    fn rng(&self, key: &str) -> StreamRng {
        substream(self.config.run.seed, key)
    }

    fn default_setting(&self) -> Setting {
        Setting::new(self.config.run.instruction_variant, self.config.run.answer_tokens)
    }

    fn random_entity_type(&self, rng: &mut StreamRng) -> EntityType {
        self.inputs.pairs.choose(rng).map(|p| p.entity().entity_type).unwrap_or(EntityType::Person)
    }

    pub fn build(&self, experiment: Experiment) -> Result<ProbeSet> {
        if self.inputs.pairs.is_empty() {
            return Err(RunnerError::Config("the dataset has no conflict pairs".into()));
        }
        let d = self.default_setting();
        let mut set = ProbeSet { experiment, matchups: Vec::new(), prompted: Vec::new(), validation: None };
        match experiment {
            Experiment::Attribution => self.contrasts(&mut set, "attribution", &Contrast::attributed(), d)?,
            Experiment::InterType => self.contrasts(&mut set, "inter_type", &Contrast::inter_matchups(), d)?,
            Experiment::Popularity => self.contrasts(&mut set, "popularity", &Contrast::popularity(), d)?,
            Experiment::Sociodemographic => {
                self.contrasts(&mut set, "sociodemographic", &Contrast::sociodemographic(), d)?
            }
            Experiment::UserVsAi => self.contrasts(&mut set, "user_vs_ai", &[Contrast::UserAi], d)?,
            Experiment::PromptedPreference => self.prompted(&mut set, d)?,
            Experiment::MajorityRepetition => {
                self.majority(&mut set, d)?;
                self.unattributed_repetition(&mut set, d)?;
            }
            Experiment::CredibilityPrompting => {
                self.majority(&mut set, Setting::new(InstructionVariant::Default, d.answer_tokens))?;
                self.majority(&mut set, Setting::new(InstructionVariant::Credibility, d.answer_tokens))?;
            }
            Experiment::PromptStability => {
                for s in [
                    Setting::new(InstructionVariant::Default, AnswerTokens::AB),
                    Setting::new(InstructionVariant::Default, AnswerTokens::OneTwo),
                    Setting::new(InstructionVariant::Rephrased, AnswerTokens::AB),
                    Setting::new(InstructionVariant::LowSourceFocus, AnswerTokens::AB),
                ] {
                    self.contrasts(&mut set, "attribution", &Contrast::attributed(), s)?;
                    self.contrasts(&mut set, "inter_type", &Contrast::inter_matchups(), s)?;
                }
            }
            Experiment::Validation => set.validation = Some(self.validation(d)?),
        }
        Ok(set)
    }

    fn probes_for(
        &self,
        pair: &ConflictPair,
        ctx: &ContextSpec,
        setting: Setting,
        orders: &[ProbeOrder],
    ) -> Result<Vec<ProbeInstance>> {
        orders
            .iter()
            .map(|o| {
                Ok(build_conflict_probe(
                    pair,
                    ctx,
                    &self.inputs.lexicon.questions,
                    setting.instruction_variant,
                    *o,
                    setting.answer_tokens,
                )?)
            })
            .collect()
    }

    fn unattributed(&self, pair: &ConflictPair, setting: Setting, orders: &[ProbeOrder]) -> Result<Vec<ProbeInstance>> {
        let none = SourceSpec::none();
        self.probes_for(pair, &ContextSpec::pair(pair, Some(&none), Some(&none)), setting, orders)
    }

    /// Builds a matchup from per-pair contexts; the unattributed reference
    /// is the plain pair layout under `base_orders`.
    fn matchup(
        &self,
        panel: &str,
        (x, y): (String, String),
        layout: Layout,
        setting: Setting,
        contexts: &[(ConflictPair, ContextSpec)],
        base_orders: &[ProbeOrder],
    ) -> Result<Matchup> {
        let orders = if layout == Layout::Pair && base_orders.len() == 2 {
            ProbeOrder::paired()
        } else {
            ProbeOrder::all(layout)
        };
        let pairs = contexts
            .iter()
            .map(|(pair, ctx)| {
                Ok(PairProbes {
                    pair_id: pair.id.clone(),
                    attributed: self.probes_for(pair, ctx, setting, &orders)?,
                    unattributed: self.unattributed(pair, setting, base_orders)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Matchup { panel: panel.to_string(), x, y, layout, setting, pairs, baseline: None })
    }

    fn contrasts(&self, set: &mut ProbeSet, panel: &str, contrasts: &[Contrast], setting: Setting) -> Result<()> {
        for c in contrasts {
            let (xl, yl) = c.labels();
            let mut contexts = Vec::with_capacity(self.inputs.pairs.len());
            for pair in &self.inputs.pairs {
                let mut rng = self.rng(&format!("{panel}/{xl}/{yl}/{}", pair.id));
                let et = pair.entity().entity_type;
                let (p, x, y) = c.draw(&self.sampler, Some(pair), et, self.config.data.location_match, &mut rng)?;
                let p = p.unwrap_or_else(|| pair.clone());
                let ctx = ContextSpec::pair(&p, Some(&x), Some(&y));
                contexts.push((p, ctx));
            }
            set.matchups.push(self.matchup(panel, (xl, yl), Layout::Pair, setting, &contexts, &ProbeOrder::paired())?);
        }
        Ok(())
    }

    /// Social media majority or repetition against a single government table.
    fn majority(&self, set: &mut ProbeSet, setting: Setting) -> Result<()> {
        let panel = "majority";
        let mut by_layout: Vec<(Layout, Vec<(ConflictPair, ContextSpec)>)> =
            [Layout::Pair, Layout::Majority2Table, Layout::Majority1Table, Layout::Repetition]
                .into_iter()
                .map(|l| (l, Vec::new()))
                .collect();
        for pair in &self.inputs.pairs {
            let mut rng = self.rng(&format!("{panel}/{}", pair.id));
            let et = pair.entity().entity_type;
            let (x1, x2) = self.sampler.sample_distinct(SourceType::SocialMedia, SourceType::SocialMedia, et, &mut rng)?;
            let y = self.sampler.sample(SourceType::Government, et, &mut rng)?;
            for (layout, out) in by_layout.iter_mut() {
                let ctx = match layout {
                    Layout::Pair => ContextSpec::pair(pair, Some(&x1), Some(&y)),
                    Layout::Majority2Table => ContextSpec::majority_2table(pair, &x1, &x2, &y)?,
                    Layout::Majority1Table => ContextSpec::majority_1table(pair, &x1, &x2, &y)?,
                    _ => ContextSpec::repetition(pair, Some(&x1), Some(&y))?,
                };
                out.push((pair.clone(), ctx));
            }
        }
        let base_orders = ProbeOrder::all(Layout::Pair);
        let labels = (SourceType::SocialMedia.as_str().to_string(), SourceType::Government.as_str().to_string());
        let first = set.matchups.len();
        for (layout, contexts) in &by_layout {
            let mut m = self.matchup(panel, labels.clone(), *layout, setting, contexts, &base_orders)?;
            if *layout != Layout::Pair {
                m.baseline = Some(first);
            }
            set.matchups.push(m);
        }
        Ok(())
    }

    /// A repeated unattributed table against each source type and against
    /// another unattributed table.
    fn unattributed_repetition(&self, set: &mut ProbeSet, setting: Setting) -> Result<()> {
        let panel = "unattributed_repetition";
        let none = SourceSpec::none();
        let base_orders = ProbeOrder::all(Layout::Pair);
        for t in SourceType::INTER.into_iter().chain([SourceType::None]) {
            let mut plain = Vec::new();
            let mut repeated = Vec::new();
            for pair in &self.inputs.pairs {
                let mut rng = self.rng(&format!("{panel}/{t}/{}", pair.id));
                let y = if t == SourceType::None {
                    SourceSpec::none()
                } else {
                    self.sampler.sample(t, pair.entity().entity_type, &mut rng)?
                };
                plain.push((pair.clone(), ContextSpec::pair(pair, Some(&none), Some(&y))));
                repeated.push((pair.clone(), ContextSpec::repetition(pair, Some(&none), Some(&y))?));
            }
            let labels = (SourceType::None.as_str().to_string(), t.as_str().to_string());
            let first = set.matchups.len();
            set.matchups.push(self.matchup(panel, labels.clone(), Layout::Pair, setting, &plain, &base_orders)?);
            let mut m = self.matchup(panel, labels, Layout::Repetition, setting, &repeated, &base_orders)?;
            m.baseline = Some(first);
            set.matchups.push(m);
        }
        Ok(())
    }

    fn prompted(&self, set: &mut ProbeSet, setting: Setting) -> Result<()> {
        let lx = &self.inputs.lexicon;
        if lx.prompted_questions.is_empty() {
            return Err(RunnerError::Config("no prompted-preference questions".into()));
        }
        let n = match self.config.run.sample {
            Some(s) => s.min(self.config.data.prompted_pairs),
            None => self.config.data.prompted_pairs,
        };
        for c in Contrast::prompted() {
            let (xl, yl) = c.labels();
            let mut groups = Vec::with_capacity(n);
            for i in 0..n {
                let mut rng = self.rng(&format!("prompted/{xl}/{yl}/{i}"));
                let et = self.random_entity_type(&mut rng);
                let (_, x, y) = c.draw(&self.sampler, None, et, self.config.data.location_match, &mut rng)?;
                let q = lx.prompted_questions.choose(&mut rng).expect("checked non-empty");
                let id = format!("{xl}~{yl}/{i}");
                groups.push(
                    [false, true]
                        .into_iter()
                        .map(|rev| build_prompted_preference_probe(&id, &x, &y, q, rev, setting.answer_tokens))
                        .collect(),
                );
            }
            set.prompted.push(PromptedContrast { panel: "prompted".into(), x: xl, y: yl, setting, groups });
        }
        Ok(())
    }

    fn validation(&self, setting: Setting) -> Result<ValidationProbes> {
        let lx = &self.inputs.lexicon;
        let cfg = &self.config.data;
        let mut v = ValidationProbes::default();
        for t in SourceType::INTER {
            for i in 0..cfg.recognizability_per_type {
                let mut rng = self.rng(&format!("validation/recognizability/{t}/{i}"));
                let et = self.random_entity_type(&mut rng);
                let source = self.sampler.sample(t, et, &mut rng)?;
                let mut assignment = SourceType::INTER;
                assignment.shuffle(&mut rng);
                v.recognizability.push(build_recognizability_probe(&source, assignment, AnswerTokens::AB)?);
            }
        }
        let chosen = sample_pairs(&self.inputs.pairs, cfg.validation_probes, self.config.run.seed);
        for (i, pair) in chosen.iter().enumerate() {
            v.table_format.push(build_table_format_probe(pair, &lx.questions, i % 2 == 1, setting.answer_tokens)?);
            let order = if i % 2 == 0 { ProbeOrder::ORIGINAL } else { ProbeOrder::REVERSED };
            v.instruction_following.extend(self.unattributed(pair, setting, &[order])?);
        }
        for pair in &self.inputs.pairs {
            v.plausibility.push(self.unattributed(pair, setting, &ProbeOrder::paired())?);
        }
        Ok(v)
    }
}
