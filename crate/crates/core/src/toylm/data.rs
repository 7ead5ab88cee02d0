use serde::{Deserialize, Serialize};

use super::vocab::{Vocab, IMAGE, STOP};
use super::ToyLmError;

pub const HUMAN_TAG: &str = "human :";
pub const ASSISTANT_TAG: &str = "assistant :";

/// A tokenized dialog ready for teacher forcing.
///
/// `inputs` is the full sequence minus its last token; `labels[t]` is the
/// next token when position `t` predicts part of the answer and `None`
/// inside the prompt, so only the answer contributes to the loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub inputs: Vec<usize>,
    pub labels: Vec<Option<usize>>,
    pub visual: Vec<f64>,
    /// Prompt ids ending right after the assistant tag, for decoding.
    pub prompt_len: usize,
    /// Detokenized answer, the reference for metric scaling.
    pub reference: String,
    pub oov: usize,
    pub truncated: bool,
}

impl Example {
    pub fn prompt(&self) -> &[usize] {
        &self.inputs[..self.prompt_len]
    }

    /// Answer ids including the closing STOP.
    pub fn target_ids(&self) -> Vec<usize> {
        self.labels.iter().flatten().copied().collect()
    }

    pub fn num_tokens(&self) -> usize {
        self.inputs.len() + 1
    }
}

/// Lays out `human : <query> IMAGE STOP assistant : <target> STOP` and
/// truncates to fit `context` inputs: answer tail first, then query tail.
pub fn encode_dialog(
    vocab: &Vocab,
    query: &str,
    target: &str,
    visual: Vec<f64>,
    context: usize,
) -> Result<Example, ToyLmError> {
    let (head, _) = vocab.encode_text(HUMAN_TAG);
    let (mut query_ids, query_oov) = vocab.encode_text(query);
    let (assistant, _) = vocab.encode_text(ASSISTANT_TAG);
    let (mut answer, answer_oov) = vocab.encode_text(target);
    if answer.is_empty() {
        return Err(ToyLmError::Argument("empty answer".into()));
    }
    answer.push(STOP);

    // The full sequence may hold context + 1 tokens, since the last one is
    // only ever a label.
    let budget = context + 1;
    let fixed = head.len() + 2 + assistant.len();
    let mut truncated = false;
    let keep_answer = answer.len().min(budget.saturating_sub(fixed + query_ids.len()).max(1));
    if keep_answer < answer.len() {
        answer.truncate(keep_answer);
        truncated = true;
    }
    if fixed + query_ids.len() + answer.len() > budget {
        let room = budget
            .checked_sub(fixed + answer.len())
            .ok_or_else(|| ToyLmError::Argument(format!("context {context} is too short for the dialog frame")))?;
        query_ids.truncate(room);
        truncated = true;
    }

    let mut seq = head;
    seq.extend(query_ids);
    seq.extend([IMAGE, STOP]);
    seq.extend(assistant);
    let prompt_len = seq.len();
    let reference = vocab.detokenize(&answer);
    seq.extend(answer);

    let inputs = seq[..seq.len() - 1].to_vec();
    let labels = (0..inputs.len())
        .map(|t| (t + 1 >= prompt_len).then(|| seq[t + 1]))
        .collect();
    Ok(Example {
        inputs,
        labels,
        visual,
        prompt_len,
        reference,
        oov: query_oov + answer_oov,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocab {
        Vocab::build(["human : assistant : make soup with leek", "1 . boil water"], 64).unwrap()
    }

    #[test]
    fn layout_and_labels() {
        let v = vocab();
        let e = encode_dialog(&v, "make soup", "boil water", vec![0.0; 2], 32).unwrap();
        let words: Vec<&str> = e.inputs.iter().map(|&i| v.token(i).unwrap()).collect();
        assert_eq!(
            words,
            ["human", ":", "make", "soup", "<image>", "<stop>", "assistant", ":", "boil", "water"]
        );
        assert_eq!(e.prompt_len, 8);
        assert!(e.labels[..7].iter().all(Option::is_none));
        assert_eq!(e.target_ids(), vec![v.id("boil").unwrap(), v.id("water").unwrap(), STOP]);
        assert_eq!(e.reference, "boil water");
        assert!(!e.truncated);
    }

    #[test]
    fn truncation_keeps_the_frame() {
        let v = vocab();
        let e = encode_dialog(&v, "make soup with leek", "1. boil water", vec![0.0; 2], 10).unwrap();
        assert!(e.truncated);
        assert!(e.inputs.len() <= 10);
        assert!(e.inputs.contains(&IMAGE));
        assert!(!e.target_ids().is_empty());
        assert!(encode_dialog(&v, "make soup", "boil", vec![0.0; 2], 4).is_err());
    }
}
