use super::backend::GeneratorBackend;
use super::GenerationError;
use crate::prompt::{GenerationMode, PromptString, TargetString};

fn mean_nll(backend: &dyn GeneratorBackend, prompt: &PromptString, target: &TargetString) -> Result<f64, GenerationError> {
    let nll = backend.token_nll(&prompt.text, &target.text)?;
    if nll.is_empty() {
        return Err(GenerationError::EmptyTarget);
    }
    Ok(nll.iter().sum::<f64>() / nll.len() as f64)
}

/// Length-normalised NLL of one reader's interpretation.
pub fn loss_one2one(
    backend: &dyn GeneratorBackend,
    prompt: &PromptString,
    target: &TargetString,
) -> Result<f64, GenerationError> {
    if prompt.mode != GenerationMode::OneToOne || target.mode != GenerationMode::OneToOne {
        return Err(GenerationError::ModeMismatch { expected: GenerationMode::OneToOne });
    }
    mean_nll(backend, prompt, target)
}

/// One-to-one loss of a sentence: the sum of its readers' losses, each
/// normalised by its own length.
pub fn sentence_loss_one2one(
    backend: &dyn GeneratorBackend,
    pairs: &[(PromptString, TargetString)],
) -> Result<f64, GenerationError> {
    pairs.iter().map(|(p, t)| loss_one2one(backend, p, t)).sum()
}

/// NLL of the concatenated target, reader tokens included, normalised by
/// its total token count.
pub fn loss_one2many(
    backend: &dyn GeneratorBackend,
    prompt: &PromptString,
    target: &TargetString,
) -> Result<f64, GenerationError> {
    if target.mode != GenerationMode::OneToMany {
        return Err(GenerationError::ModeMismatch { expected: GenerationMode::OneToMany });
    }
    mean_nll(backend, prompt, target)
}

/// `alpha * lm + (1 - alpha) * lsim`, with `alpha` strictly inside (0, 1).
pub fn combined_loss(lm: f64, lsim: f64, alpha: f64) -> Result<f64, GenerationError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GenerationError::InvalidConfig(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(alpha * lm + (1.0 - alpha) * lsim)
}
