//! Forced-choice probe rendering: instructions, Markdown table contexts,
//! questions and answer options.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chat::{ChatMessage, Role};
use crate::conflict::ConflictPair;
use crate::entity::Entity;
use crate::error::PromptError;
use crate::lexicon::QuestionTemplates;
use crate::rng::digest_hex;
use crate::sources::{SourceSpec, SourceType};

type Result<T> = std::result::Result<T, PromptError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstructionVariant {
    Default,
    Credibility,
    Rephrased,
    LowSourceFocus,
}

impl InstructionVariant {
    pub const ALL: [InstructionVariant; 4] = [
        InstructionVariant::Default,
        InstructionVariant::Credibility,
        InstructionVariant::Rephrased,
        InstructionVariant::LowSourceFocus,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            InstructionVariant::Default => "default",
            InstructionVariant::Credibility => "credibility",
            InstructionVariant::Rephrased => "rephrased",
            InstructionVariant::LowSourceFocus => "low_source_focus",
        }
    }
}

impl fmt::Display for InstructionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnswerTokens {
    #[serde(rename = "AB")]
    AB,
    #[serde(rename = "One-Two")]
    OneTwo,
}

impl AnswerTokens {
    pub fn tokens(&self, n: usize) -> Vec<String> {
        (0..n)
            .map(|i| match self {
                AnswerTokens::AB => char::from(b'A' + i as u8).to_string(),
                AnswerTokens::OneTwo => (i + 1).to_string(),
            })
            .collect()
    }

    fn noun(&self) -> &'static str {
        match self {
            AnswerTokens::AB => "letter",
            AnswerTokens::OneTwo => "number",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AnswerTokens::AB => "AB",
            AnswerTokens::OneTwo => "One-Two",
        }
    }
}

const TASK_LINE: &str = "The following are multiple choice questions.";
const SOURCES_LINE: &str = " You are provided tabular data from sources.";
const ANSWER_LINE: &str = "Answer only with the {NOUN} corresponding to the correct answer and nothing else.";
const REPHRASED: &str = "You are answering multiple choice questions. Given the following tables and sources, answer the question below. Do so by replying only with the {NOUN} of the correct answer and with nothing else.";
pub const CREDIBILITY_SENTENCE: &str =
    "When selecting an answer, identify which sources support each option and assess the credibility of those sources before deciding.";

pub fn build_instruction(variant: InstructionVariant, tokens: AnswerTokens) -> String {
    let answer = ANSWER_LINE.replace("{NOUN}", tokens.noun());
    match variant {
        InstructionVariant::Default => format!("{TASK_LINE}{SOURCES_LINE}\n{answer}"),
        InstructionVariant::Credibility => format!("{TASK_LINE}{SOURCES_LINE}\n{answer}\n{CREDIBILITY_SENTENCE}"),
        InstructionVariant::Rephrased => REPHRASED.replace("{NOUN}", tokens.noun()),
        InstructionVariant::LowSourceFocus => format!("{TASK_LINE}\n{answer}"),
    }
}

/// Instruction for context-free prompts (no tables are shown).
pub fn context_free_instruction(tokens: AnswerTokens) -> String {
    build_instruction(InstructionVariant::LowSourceFocus, tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(&self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Pair,
    #[serde(rename = "majority_2table")]
    Majority2Table,
    #[serde(rename = "majority_1table")]
    Majority1Table,
    Repetition,
    SingleTable,
}

impl Layout {
    pub fn as_str(&self) -> &'static str {
        match self {
            Layout::Pair => "pair",
            Layout::Majority2Table => "majority_2table",
            Layout::Majority1Table => "majority_1table",
            Layout::Repetition => "repetition",
            Layout::SingleTable => "single_table",
        }
    }

    /// Side of each slot in canonical order.
    pub fn canonical_sides(&self) -> &'static [Side] {
        match self {
            Layout::Pair | Layout::Majority1Table => &[Side::A, Side::B],
            Layout::Majority2Table | Layout::Repetition => &[Side::A, Side::A, Side::B],
            Layout::SingleTable => &[Side::A],
        }
    }

    /// Every distinct side pattern, as permutations of canonical slot indices.
    /// Slots of one side keep their canonical relative order. The canonical
    /// arrangement is first; for two slots the second is the full reversal.
    pub fn arrangements(&self) -> Vec<Vec<usize>> {
        let sides = self.canonical_sides();
        let n = sides.len();
        let a_count = sides.iter().filter(|s| **s == Side::A).count();
        let mut out = Vec::new();
        // Choose positions for the A slots, in lexicographic order of the pattern.
        for mask in (0..(1u32 << n)).rev() {
            if mask.count_ones() as usize != a_count {
                continue;
            }
            let mut a_iter = sides.iter().enumerate().filter(|(_, s)| **s == Side::A).map(|(i, _)| i);
            let mut b_iter = sides.iter().enumerate().filter(|(_, s)| **s == Side::B).map(|(i, _)| i);
            let perm: Vec<usize> = (0..n)
                .map(|pos| {
                    if mask & (1 << (n - 1 - pos)) != 0 {
                        a_iter.next().expect("a slot")
                    } else {
                        b_iter.next().expect("b slot")
                    }
                })
                .collect();
            out.push(perm);
        }
        out
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which slot arrangement is shown and whether the option order is flipped
/// relative to table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProbeOrder {
    pub arrangement: usize,
    pub options_flipped: bool,
}

impl ProbeOrder {
    pub const ORIGINAL: ProbeOrder = ProbeOrder { arrangement: 0, options_flipped: false };
    /// Tables in reverse order, options following the tables.
    pub const REVERSED: ProbeOrder = ProbeOrder { arrangement: 1, options_flipped: false };

    /// The original and reversed presentation.
    pub fn paired() -> Vec<ProbeOrder> {
        vec![Self::ORIGINAL, Self::REVERSED]
    }

    /// Every slot arrangement combined with both option orders.
    pub fn all(layout: Layout) -> Vec<ProbeOrder> {
        let mut out = Vec::new();
        for arrangement in 0..layout.arrangements().len() {
            for options_flipped in [false, true] {
                out.push(ProbeOrder { arrangement, options_flipped });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub side: Side,
    pub table: Entity,
    /// Empty for an unattributed table.
    pub sources: Vec<SourceSpec>,
}

/// Tables and their sources in rendered order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSpec {
    pub layout: Layout,
    pub slots: Vec<Slot>,
}

impl ContextSpec {
    fn validated(layout: Layout, slots: Vec<Slot>) -> Result<Self> {
        let sides: Vec<Side> = slots.iter().map(|s| s.side).collect();
        if sides != layout.canonical_sides() {
            return Err(PromptError::Layout(format!("{layout} expects sides {:?}", layout.canonical_sides())));
        }
        let ctx = Self { layout, slots };
        ctx.check()?;
        Ok(ctx)
    }

    fn check(&self) -> Result<()> {
        let a: Vec<&Slot> = self.slots.iter().filter(|s| s.side == Side::A).collect();
        match self.layout {
            Layout::Repetition => {
                if a[0].table != a[1].table || a[0].sources != a[1].sources {
                    return Err(PromptError::Layout("repetition slots must be identical".into()));
                }
            }
            Layout::Majority2Table => {
                if a[0].table != a[1].table {
                    return Err(PromptError::Layout("majority slots must share table content".into()));
                }
                if a[0].sources == a[1].sources {
                    return Err(PromptError::Layout("majority slots need distinct sources".into()));
                }
            }
            Layout::Majority1Table => {
                if a[0].sources.len() != 2 {
                    return Err(PromptError::Layout("1-table majority carries two sources".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn attach(source: Option<&SourceSpec>) -> Vec<SourceSpec> {
        source.cloned().into_iter().collect()
    }

    /// `(T_A^x, T_B^y)`; `None` leaves a table unattributed.
    pub fn pair(pair: &ConflictPair, x: Option<&SourceSpec>, y: Option<&SourceSpec>) -> Self {
        Self {
            layout: Layout::Pair,
            slots: vec![
                Slot { side: Side::A, table: pair.base.clone(), sources: Self::attach(x) },
                Slot { side: Side::B, table: pair.variant.clone(), sources: Self::attach(y) },
            ],
        }
    }

    /// `(T_A^{x1}, T_A^{x2}, T_B^y)` with `x1 ≠ x2`.
    pub fn majority_2table(pair: &ConflictPair, x1: &SourceSpec, x2: &SourceSpec, y: &SourceSpec) -> Result<Self> {
        Self::validated(
            Layout::Majority2Table,
            vec![
                Slot { side: Side::A, table: pair.base.clone(), sources: vec![x1.clone()] },
                Slot { side: Side::A, table: pair.base.clone(), sources: vec![x2.clone()] },
                Slot { side: Side::B, table: pair.variant.clone(), sources: vec![y.clone()] },
            ],
        )
    }

    /// `(T_A^{x1,x2}, T_B^y)`.
    pub fn majority_1table(pair: &ConflictPair, x1: &SourceSpec, x2: &SourceSpec, y: &SourceSpec) -> Result<Self> {
        Self::validated(
            Layout::Majority1Table,
            vec![
                Slot { side: Side::A, table: pair.base.clone(), sources: vec![x1.clone(), x2.clone()] },
                Slot { side: Side::B, table: pair.variant.clone(), sources: vec![y.clone()] },
            ],
        )
    }

    /// `(T_A^x, T_A^x, T_B^y)`; `x = None` repeats an unattributed table.
    pub fn repetition(pair: &ConflictPair, x: Option<&SourceSpec>, y: Option<&SourceSpec>) -> Result<Self> {
        Self::validated(
            Layout::Repetition,
            vec![
                Slot { side: Side::A, table: pair.base.clone(), sources: Self::attach(x) },
                Slot { side: Side::A, table: pair.base.clone(), sources: Self::attach(x) },
                Slot { side: Side::B, table: pair.variant.clone(), sources: Self::attach(y) },
            ],
        )
    }

    pub fn single_table(view: &Entity, source: Option<&SourceSpec>) -> Self {
        Self {
            layout: Layout::SingleTable,
            slots: vec![Slot { side: Side::A, table: view.clone(), sources: Self::attach(source) }],
        }
    }

    /// Reorders canonical slots by one of [`Layout::arrangements`].
    pub fn arranged(&self, arrangement: usize) -> Result<Self> {
        let arrangements = self.layout.arrangements();
        let perm = arrangements
            .get(arrangement)
            .ok_or_else(|| PromptError::Layout(format!("{} has no arrangement {arrangement}", self.layout)))?;
        Ok(Self { layout: self.layout, slots: perm.iter().map(|&i| self.slots[i].clone()).collect() })
    }

    /// Slots in reverse order.
    pub fn reversed(&self) -> Self {
        Self { layout: self.layout, slots: self.slots.iter().rev().cloned().collect() }
    }

    pub fn value_on(&self, side: Side, attribute: &str) -> Option<&str> {
        self.slots
            .iter()
            .find(|s| s.side == side)
            .and_then(|s| s.table.get(attribute))
            .map(|v| v.raw())
    }

    pub fn sources_on(&self, side: Side) -> impl Iterator<Item = &SourceSpec> {
        self.slots.iter().filter(move |s| s.side == side).flat_map(|s| s.sources.iter())
    }

    pub fn tables_on(&self, side: Side) -> usize {
        self.slots.iter().filter(|s| s.side == side).count()
    }
}

/// `date_of_birth` → `Date Of Birth`.
pub fn field_title(name: &str) -> String {
    name.split('_')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let mut c = t.chars();
            match c.next() {
                Some(f) => f.to_uppercase().chain(c).collect::<String>(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HeaderStyle {
    /// Use `Sources:` even for a single source.
    pub always_plural: bool,
    /// Drop `No source available` from headers.
    pub low_source_focus: bool,
}

pub fn table_header(label: char, sources: &[SourceSpec], style: HeaderStyle) -> String {
    let shown: Vec<String> = sources
        .iter()
        .filter(|s| !(style.low_source_focus && s.source_type == SourceType::None))
        .map(SourceSpec::label)
        .collect();
    if shown.is_empty() {
        return format!("Table {label}:");
    }
    let noun = if shown.len() > 1 || style.always_plural { "Sources" } else { "Source" };
    format!("Table {label} ({noun}: {}):", shown.join(", "))
}

pub fn render_table(view: &Entity, sources: &[SourceSpec], label: char, style: HeaderStyle) -> String {
    let mut out = table_header(label, sources, style);
    out.push_str("\n| Field | Value |\n|-------|-------|");
    for a in view.attributes() {
        out.push_str(&format!("\n| {} | {} |", field_title(&a.name), a.value.raw()));
    }
    out
}

/// A table read back from rendered Markdown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTable {
    pub header: String,
    pub rows: Vec<(String, String)>,
}

/// Reference parser for [`render_table`] output.
pub fn parse_table(text: &str) -> Option<ParsedTable> {
    let mut lines = text.lines();
    let header = lines.next()?.to_string();
    if !header.starts_with("Table ") || !header.ends_with(':') {
        return None;
    }
    if lines.next()? != "| Field | Value |" || lines.next()? != "|-------|-------|" {
        return None;
    }
    let mut rows = Vec::new();
    for l in lines {
        let inner = l.strip_prefix("| ")?.strip_suffix(" |")?;
        let (f, v) = inner.split_once(" | ")?;
        rows.push((f.to_string(), v.to_string()));
    }
    Some(ParsedTable { header, rows })
}

impl ParsedTable {
    pub fn render(&self) -> String {
        let mut out = format!("{}\n| Field | Value |\n|-------|-------|", self.header);
        for (f, v) in &self.rows {
            out.push_str(&format!("\n| {f} | {v} |"));
        }
        out
    }
}

pub fn render_context(ctx: &ContextSpec, low_source_focus: bool) -> String {
    let style = HeaderStyle { always_plural: ctx.layout == Layout::Majority1Table, low_source_focus };
    let tables: Vec<String> = ctx
        .slots
        .iter()
        .enumerate()
        .map(|(i, s)| render_table(&s.table, &s.sources, char::from(b'A' + i as u8), style))
        .collect();
    format!("Context:\n{}", tables.join("\n\n"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub token: String,
    pub text: String,
    /// Canonical side the option's value belongs to, for conflict and
    /// prompted-preference probes.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub side: Option<Side>,
}

fn options_block(options: &[AnswerOption]) -> String {
    options.iter().map(|o| format!("({}) {}", o.token, o.text)).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Conflict,
    PromptedPreference,
    Recognizability,
    TableFormat,
}

/// One fully rendered prompt plus everything needed to interpret its answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeInstance {
    pub probe_id: String,
    pub pair_id: String,
    pub kind: ProbeKind,
    pub instruction_variant: InstructionVariant,
    pub answer_tokens: AnswerTokens,
    pub order: ProbeOrder,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub context: Option<ContextSpec>,
    pub question: String,
    pub options: Vec<AnswerOption>,
    /// Index of the option a correct answer picks, when one exists.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target_option: Option<usize>,
    pub messages: Vec<ChatMessage>,
}

impl ProbeInstance {
    fn finish(mut self) -> Self {
        let content = serde_json::json!({
            "messages": self.messages,
            "options": self.options.iter().map(|o| (&o.token, &o.text)).collect::<Vec<_>>(),
        });
        self.probe_id = digest_hex(content.to_string().as_bytes())[..32].to_string();
        self
    }

    pub fn segment(&self, role: Role) -> Option<&str> {
        self.messages.iter().find(|m| m.role == role).map(|m| m.content.as_str())
    }

    pub fn system(&self) -> &str {
        self.segment(Role::System).unwrap_or_default()
    }

    pub fn user(&self) -> &str {
        self.segment(Role::User).unwrap_or_default()
    }

    pub fn tokens(&self) -> Vec<&str> {
        self.options.iter().map(|o| o.token.as_str()).collect()
    }

    /// Index of the option bound to `side`.
    pub fn option_for(&self, side: Side) -> Option<usize> {
        self.options.iter().position(|o| o.side == Some(side))
    }
}

/// Renders a conflict probe. Option order follows the order in which the two
/// values first appear in the context, swapped when `order.options_flipped`.
pub fn build_conflict_probe(
    pair: &ConflictPair,
    canonical: &ContextSpec,
    questions: &QuestionTemplates,
    variant: InstructionVariant,
    order: ProbeOrder,
    tokens: AnswerTokens,
) -> Result<ProbeInstance> {
    let question = questions.question(pair.entity(), &pair.conflict_attribute)?;
    build_conflict_probe_with_question(pair, canonical, &question, variant, order, tokens)
}

pub fn build_conflict_probe_with_question(
    pair: &ConflictPair,
    canonical: &ContextSpec,
    question: &str,
    variant: InstructionVariant,
    order: ProbeOrder,
    tokens: AnswerTokens,
) -> Result<ProbeInstance> {
    let ctx = canonical.arranged(order.arrangement)?;
    let attr = &pair.conflict_attribute;
    let first = ctx.slots[0].side;
    let mut sides = vec![first];
    if ctx.layout != Layout::SingleTable {
        sides.push(first.other());
    }
    if order.options_flipped {
        sides.reverse();
    }
    let toks = tokens.tokens(sides.len());
    let mut options = Vec::new();
    for (side, token) in sides.iter().zip(toks) {
        let text = ctx
            .value_on(*side, attr)
            .ok_or_else(|| PromptError::Layout(format!("no table on side {side:?} shows `{attr}`")))?;
        options.push(AnswerOption { token, text: text.to_string(), side: Some(*side) });
    }
    let low = variant == InstructionVariant::LowSourceFocus;
    let user = format!("{}\n\n\n\"{question}\"\n{}", render_context(&ctx, low), options_block(&options));
    Ok(ProbeInstance {
        probe_id: String::new(),
        pair_id: pair.id.clone(),
        kind: ProbeKind::Conflict,
        instruction_variant: variant,
        answer_tokens: tokens,
        order,
        context: Some(ctx),
        question: question.to_string(),
        options,
        target_option: None,
        messages: vec![ChatMessage::system(build_instruction(variant, tokens)), ChatMessage::user(user)],
    }
    .finish())
}

/// Context-free credibility question; `x` is bound to side A.
pub fn build_prompted_preference_probe(
    pair_id: &str,
    x: &SourceSpec,
    y: &SourceSpec,
    question: &str,
    reversed: bool,
    tokens: AnswerTokens,
) -> ProbeInstance {
    let mut bound = vec![(x, Side::A), (y, Side::B)];
    if reversed {
        bound.reverse();
    }
    let options: Vec<AnswerOption> = bound
        .into_iter()
        .zip(tokens.tokens(2))
        .map(|((s, side), token)| AnswerOption { token, text: s.label(), side: Some(side) })
        .collect();
    let user = format!("{question}\n{}", options_block(&options));
    ProbeInstance {
        probe_id: String::new(),
        pair_id: pair_id.to_string(),
        kind: ProbeKind::PromptedPreference,
        instruction_variant: InstructionVariant::LowSourceFocus,
        answer_tokens: tokens,
        order: if reversed { ProbeOrder::REVERSED } else { ProbeOrder::ORIGINAL },
        context: None,
        question: question.to_string(),
        options,
        target_option: None,
        messages: vec![ChatMessage::system(context_free_instruction(tokens)), ChatMessage::user(user)],
    }
    .finish()
}

pub const RECOGNIZABILITY_QUESTION: &str = "What type of source is \"{SOURCE}\"?";

/// Asks which of the four source types `source` belongs to. `assignment`
/// gives the type shown at each option position.
pub fn build_recognizability_probe(
    source: &SourceSpec,
    assignment: [SourceType; 4],
    tokens: AnswerTokens,
) -> Result<ProbeInstance> {
    let target = assignment
        .iter()
        .position(|t| *t == source.source_type)
        .ok_or_else(|| PromptError::Layout(format!("{} is not among the offered types", source.source_type)))?;
    let options: Vec<AnswerOption> = assignment
        .iter()
        .zip(tokens.tokens(4))
        .map(|(t, token)| AnswerOption { token, text: t.description().to_string(), side: None })
        .collect();
    let question = RECOGNIZABILITY_QUESTION.replace("{SOURCE}", &source.label());
    let user = format!("{question}\n{}", options_block(&options));
    Ok(ProbeInstance {
        probe_id: String::new(),
        pair_id: source.display().to_string(),
        kind: ProbeKind::Recognizability,
        instruction_variant: InstructionVariant::LowSourceFocus,
        answer_tokens: tokens,
        order: ProbeOrder::ORIGINAL,
        context: None,
        question,
        options,
        target_option: Some(target),
        messages: vec![ChatMessage::system(context_free_instruction(tokens)), ChatMessage::user(user)],
    }
    .finish())
}

/// One unattributed table showing the base value; the variant value is offered
/// as the other option but appears nowhere in the context.
pub fn build_table_format_probe(
    pair: &ConflictPair,
    questions: &QuestionTemplates,
    flipped: bool,
    tokens: AnswerTokens,
) -> Result<ProbeInstance> {
    let question = questions.question(pair.entity(), &pair.conflict_attribute)?;
    let ctx = ContextSpec::single_table(&pair.base, None);
    let mut texts = vec![(pair.base_value.raw(), Some(Side::A)), (pair.variant_value.raw(), None)];
    if flipped {
        texts.reverse();
    }
    let options: Vec<AnswerOption> = texts
        .into_iter()
        .zip(tokens.tokens(2))
        .map(|((t, side), token)| AnswerOption { token, text: t.to_string(), side })
        .collect();
    let target = options.iter().position(|o| o.side == Some(Side::A));
    let user = format!("{}\n\n\n\"{question}\"\n{}", render_context(&ctx, false), options_block(&options));
    Ok(ProbeInstance {
        probe_id: String::new(),
        pair_id: pair.id.clone(),
        kind: ProbeKind::TableFormat,
        instruction_variant: InstructionVariant::Default,
        answer_tokens: tokens,
        order: ProbeOrder { arrangement: 0, options_flipped: flipped },
        context: Some(ctx),
        question,
        options,
        target_option: target,
        messages: vec![
            ChatMessage::system(build_instruction(InstructionVariant::Default, tokens)),
            ChatMessage::user(user),
        ],
    }
    .finish())
}

static SHORT_ANSWER: std::sync::LazyLock<regex::Regex> =
    std::sync::LazyLock::new(|| regex::Regex::new(r"^\s*\(?([A-Za-z0-9]+)\)?[.:]?\s*$").expect("valid pattern"));

/// The answer token in a short generation, if the reply is only that token
/// with optional parentheses and trailing punctuation.
pub fn parse_short_answer(reply: &str, tokens: &[&str]) -> Option<String> {
    let caps = SHORT_ANSWER.captures(reply)?;
    let t = caps.get(1)?.as_str();
    tokens.contains(&t).then(|| t.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::{parse_seed_line, AttributeValue};
    use crate::lexicon::Lexicon;

    fn sarah_pair() -> (Lexicon, ConflictPair) {
        let lx = Lexicon::builtin();
        let e = parse_seed_line(crate::lexicon::SAMPLE_ENTITIES.lines().next().unwrap(), &lx.attributes).unwrap();
        let v = AttributeValue::new(crate::entity::ValueKind::ExactDate, "1987-08-14").unwrap();
        let p = ConflictPair::from_replacement("p", &e, "date_of_birth", v).unwrap();
        (lx, p)
    }

    #[test]
    fn instructions_differ() {
        let all: Vec<String> =
            InstructionVariant::ALL.iter().map(|v| build_instruction(*v, AnswerTokens::AB)).collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j]);
            }
        }
        assert!(all[0].contains("tabular data from sources"));
        assert!(!all[3].contains("tabular data from sources"));
        assert!(all[1].contains(CREDIBILITY_SENTENCE));
        assert!(build_instruction(InstructionVariant::Default, AnswerTokens::OneTwo).contains("the number"));
    }

    #[test]
    fn arrangements_cover_distinct_patterns() {
        assert_eq!(Layout::Pair.arrangements(), vec![vec![0, 1], vec![1, 0]]);
        let rep = Layout::Repetition.arrangements();
        assert_eq!(rep, vec![vec![0, 1, 2], vec![0, 2, 1], vec![2, 0, 1]]);
        assert_eq!(Layout::SingleTable.arrangements(), vec![vec![0]]);
        assert_eq!(ProbeOrder::all(Layout::Majority2Table).len(), 6);
    }

    #[test]
    fn short_answers() {
        let t = ["A", "B"];
        assert_eq!(parse_short_answer("A", &t).as_deref(), Some("A"));
        assert_eq!(parse_short_answer(" (B).\n", &t).as_deref(), Some("B"));
        assert_eq!(parse_short_answer("The answer is A", &t), None);
        assert_eq!(parse_short_answer("C", &t), None);
    }

    #[test]
    fn field_titles() {
        assert_eq!(field_title("date_of_birth"), "Date Of Birth");
        assert_eq!(field_title("name"), "Name");
    }

    #[test]
    fn single_row_table() {
        let e = Entity::new(
            "x",
            crate::entity::EntityType::Art,
            "t",
            vec![crate::entity::Attribute { name: "name".into(), value: AttributeValue::text("Q") }],
        )
        .unwrap();
        let t = render_table(&e, &[], 'A', HeaderStyle::default());
        assert_eq!(t, "Table A:\n| Field | Value |\n|-------|-------|\n| Name | Q |");
    }

    #[test]
    fn headers() {
        let none = SourceSpec::none();
        let s = HeaderStyle::default();
        assert_eq!(table_header('B', std::slice::from_ref(&none), s), "Table B (Source: No source available):");
        let low = HeaderStyle { low_source_focus: true, ..s };
        assert_eq!(table_header('B', &[none], low), "Table B:");
        let g = SourceSpec::verbatim(SourceType::Government, "G");
        let n = SourceSpec::verbatim(SourceType::Newspaper, "N");
        assert_eq!(table_header('A', &[g.clone(), n], s), "Table A (Sources: G, N):");
        let plural = HeaderStyle { always_plural: true, ..s };
        assert_eq!(table_header('A', &[g], plural), "Table A (Sources: G):");
    }

    #[test]
    fn reversed_probe_swaps_tables_and_options() {
        let (lx, p) = sarah_pair();
        let x = SourceSpec::verbatim(SourceType::Government, "Civil Registry of Silverbine Heights");
        let ctx = ContextSpec::pair(&p, Some(&x), Some(&SourceSpec::none()));
        let o = build_conflict_probe(&p, &ctx, &lx.questions, InstructionVariant::Default, ProbeOrder::ORIGINAL, AnswerTokens::AB).unwrap();
        let r = build_conflict_probe(&p, &ctx, &lx.questions, InstructionVariant::Default, ProbeOrder::REVERSED, AnswerTokens::AB).unwrap();
        assert_eq!(o.options[0].text, "1986-10-15");
        assert_eq!(r.options[0].text, "1987-08-14");
        assert_eq!(r.option_for(Side::A), Some(1));
        assert_ne!(o.probe_id, r.probe_id);
        assert_eq!(ctx.reversed().reversed(), ctx);
    }

    #[test]
    fn layout_invariants_enforced() {
        let (_, p) = sarah_pair();
        let x = SourceSpec::verbatim(SourceType::SocialMedia, "@A");
        let y = SourceSpec::verbatim(SourceType::Government, "G");
        assert!(ContextSpec::majority_2table(&p, &x, &x, &y).is_err());
        assert!(ContextSpec::repetition(&p, Some(&x), Some(&y)).is_ok());
    }
}
