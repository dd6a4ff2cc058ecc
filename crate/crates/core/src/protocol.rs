//! Background ‖ Details ‖ Question prompts, deterministic Details rendering,
//! byte-level tokenization and supervision-masked dialogue samples.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::hidto::{Binding, HidtoSequence};
use crate::hypergraph::Hypergraph;

pub const PLACEHOLDER: &str = "<hypergraph>";
pub const EMPTY_DETAILS: &str = "No local context available.";
pub const YES: &str = "Yes";
pub const NO: &str = "No";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    /// Vertex classification.
    Vc,
    /// Hyperedge classification.
    Hec,
    /// Same-hyperedge membership diagnostic.
    Diag,
}

impl Task {
    pub fn parse(s: &str) -> Option<Task> {
        match s {
            "vc" => Some(Task::Vc),
            "hec" => Some(Task::Hec),
            "diag" => Some(Task::Diag),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptParts {
    pub background: String,
    pub details: String,
    pub question: String,
}

impl PromptParts {
    /// Parts joined by blank lines; an empty Details section is left out.
    pub fn render(&self) -> String {
        let mut out = self.background.clone();
        for part in [&self.details, &self.question] {
            if !part.is_empty() {
                out.push_str("\n\n");
                out.push_str(part);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let count = self.render().matches(PLACEHOLDER).count();
        if count != 1 {
            return Err(Error::Placeholder(count));
        }
        Ok(())
    }
}

/// Candidate labels for classification tasks: `c0, c1, …`.
pub fn class_labels(num_classes: usize) -> Vec<String> {
    (0..num_classes).map(|k| format!("c{k}")).collect()
}

/// The label set of a task: Yes/No for the diagnostic.
pub fn task_labels(task: Task, num_classes: usize) -> Vec<String> {
    match task {
        Task::Diag => alloc::vec![YES.to_string(), NO.to_string()],
        _ => class_labels(num_classes),
    }
}

/// Builds the three-part prompt. The diagnostic never carries a Details
/// section, whatever `details` holds.
pub fn build_prompt(task: Task, labels: &[String], details: &str) -> Result<PromptParts> {
    if labels.is_empty() {
        return Err(Error::EmptyLabelSet);
    }
    let list = labels.join(", ");
    let parts = match task {
        Task::Vc => PromptParts {
            background: format!(
                "Given a vertex-centered hypergraph: {PLACEHOLDER}, where vertices are objects and hyperedges \
                 represent high-order group associations among them. The task is vertex classification: \
                 predict the category of the center vertex."
            ),
            details: details.to_string(),
            question: format!(
                "Question: Which category does the center vertex belong to? Candidate categories: {list}. \
                 Directly answer with one category from the list."
            ),
        },
        Task::Hec => PromptParts {
            background: format!(
                "Given a hyperedge-centered hypergraph: {PLACEHOLDER}, where the center hyperedge groups a set of \
                 vertices into one high-order association. The task is hyperedge classification: predict the \
                 category of the center hyperedge."
            ),
            details: details.to_string(),
            question: format!(
                "Question: Which category does the center hyperedge belong to? Candidate categories: {list}. \
                 Directly answer with one category from the list."
            ),
        },
        Task::Diag => PromptParts {
            background: format!(
                "Given a vertex-centered hypergraph: {PLACEHOLDER}, where hyperedges represent native high-order \
                 group memberships among vertices. The hypergraph tokens mark one center vertex and two candidate \
                 vertices; no textual hyperedge list is provided."
            ),
            details: String::new(),
            question: "Question: Do the center vertex and the two candidate vertices jointly occur in a single \
                       hyperedge? Directly answer Yes or No."
                .to_string(),
        },
    };
    parts.validate()?;
    Ok(parts)
}

/// One line per real hyperedge slot in the first two layers, in slot order:
///
/// `Hyperedge <id> (order <r>) connects: <member>, <member>`
///
/// Members are the vertex slots incident to the hyperedge in slot order,
/// shown by their text when available and as `vertex <id>` otherwise. When
/// some members were not sampled the line ends with `, ... (+N more)`.
pub fn render_details(seq: &HidtoSequence, h: &Hypergraph) -> Result<String> {
    let mut out = String::new();
    for slot in &seq.slots[..seq.detail_len] {
        let Binding::Hyperedge(e) = slot.binding else { continue };
        if slot.layer > 2 {
            continue;
        }
        let order = h.members(e)?.len();
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = write!(out, "Hyperedge {e} (order {order}) connects: ");
        let shown = &seq.members[slot.index];
        for (k, &m) in shown.iter().enumerate() {
            if k > 0 {
                out.push_str(", ");
            }
            let v = seq.slots[m].vertex().expect("member slots bind vertices");
            match h.vertex_text(v) {
                Some(t) => out.push_str(t),
                None => {
                    let _ = write!(out, "vertex {v}");
                }
            }
        }
        if shown.len() < order {
            let _ = write!(out, ", ... (+{} more)", order - shown.len());
        }
    }
    if out.is_empty() {
        out.push_str(EMPTY_DETAILS);
    }
    Ok(out)
}

/// Byte-level vocabulary with an optional end-of-sequence symbol and a
/// reserved placeholder id that never reaches the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocabulary {
    pub eos: bool,
}

impl Vocabulary {
    pub const EOS: u32 = 256;

    pub fn byte_level() -> Self {
        Vocabulary { eos: true }
    }

    /// Number of symbols the model embeds and predicts.
    pub fn size(&self) -> usize {
        if self.eos {
            257
        } else {
            256
        }
    }

    /// Id written at hypergraph-region positions.
    pub fn placeholder_id(&self) -> u32 {
        self.size() as u32
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.bytes().map(u32::from).collect()
    }

    /// Decodes up to the first EOS; non-byte ids are dropped.
    pub fn decode(&self, ids: &[u32]) -> String {
        let bytes: Vec<u8> =
            ids.iter().take_while(|&&t| !(self.eos && t == Self::EOS)).filter(|&&t| t < 256).map(|&t| t as u8).collect();
        String::from_utf8_lossy(&bytes).into_owned()
    }

    pub fn answer_ids(&self, answer: &str) -> Vec<u32> {
        let mut ids = self.encode(answer);
        if self.eos {
            ids.push(Self::EOS);
        }
        ids
    }
}

/// Model-ready sample: `ids[hg_start..hg_start + hg_len]` is the hypergraph
/// region and the answer occupies the last `answer_len` positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueSample {
    pub prompt: String,
    pub answer: String,
    pub ids: Vec<u32>,
    /// Next-token targets; only entries at supervised positions are read.
    pub labels: Vec<u32>,
    pub hg_start: usize,
    pub hg_len: usize,
    pub answer_len: usize,
    pub mask: Vec<bool>,
}

impl DialogueSample {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn hg_range(&self) -> core::ops::Range<usize> {
        self.hg_start..self.hg_start + self.hg_len
    }

    /// Everything before the answer.
    pub fn prompt_len(&self) -> usize {
        self.ids.len() - self.answer_len
    }

    /// Supervised positions `p`: the model predicts `ids[p]` from the prefix `..p`.
    pub fn supervised(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(p, _)| p)
    }
}

/// Replaces the placeholder by `hg_len` region positions and appends the
/// supervised answer.
pub fn assemble(
    parts: &PromptParts,
    hg_len: usize,
    vocab: &Vocabulary,
    answer: &str,
    max_len: usize,
) -> Result<DialogueSample> {
    parts.validate()?;
    let prompt = parts.render();
    let at = prompt.find(PLACEHOLDER).expect("validated");
    let before = vocab.encode(&prompt[..at]);
    let after = vocab.encode(&prompt[at + PLACEHOLDER.len()..]);
    let answer_ids = vocab.answer_ids(answer);
    if answer.is_empty() {
        return Err(Error::EmptyAnswer);
    }
    let mut ids = before.clone();
    ids.extend(core::iter::repeat_n(vocab.placeholder_id(), hg_len));
    ids.extend(after);
    let prompt_len = ids.len();
    ids.extend(&answer_ids);
    if ids.len() > max_len {
        return Err(Error::TooLong { len: ids.len(), limit: max_len });
    }
    let mut mask = alloc::vec![false; ids.len()];
    mask[prompt_len..].iter_mut().for_each(|m| *m = true);
    Ok(DialogueSample {
        prompt,
        answer: answer.to_string(),
        labels: ids.clone(),
        ids,
        hg_start: before.len(),
        hg_len,
        answer_len: answer_ids.len(),
        mask,
    })
}

/// Index of the label matched by generated text: exact match after
/// trimming, else the longest label that prefixes the text at a word
/// boundary. `None` marks an invalid output.
pub fn parse_answer(text: &str, labels: &[String]) -> Option<usize> {
    let t = text.trim();
    if let Some(i) = labels.iter().position(|l| l == t) {
        return Some(i);
    }
    labels
        .iter()
        .enumerate()
        .filter(|(_, l)| {
            !l.is_empty()
                && t.starts_with(l.as_str())
                && t[l.len()..].chars().next().is_none_or(|c| !c.is_alphanumeric())
        })
        .max_by_key(|(_, l)| l.len())
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_prefers_exact_then_longest_prefix() {
        let labels = class_labels(12);
        assert_eq!(parse_answer(" c1 ", &labels), Some(1));
        assert_eq!(parse_answer("c10.", &labels), Some(10));
        assert_eq!(parse_answer("c1x", &labels), None);
        let yn = task_labels(Task::Diag, 0);
        assert_eq!(parse_answer("Yes, they do", &yn), Some(0));
        assert_eq!(parse_answer("Maybe", &yn), None);
    }

    #[test]
    fn decode_stops_at_eos() {
        let v = Vocabulary::byte_level();
        assert_eq!(v.decode(&[89, 101, 115, 256, 65]), "Yes");
        assert_eq!(v.answer_ids("No"), alloc::vec![78, 111, 256]);
    }
}
