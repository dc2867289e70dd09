//! The four-question post-task survey.

use thiserror::Error;

pub const SCALE_MIN: u8 = 1;
pub const SCALE_MAX: u8 = 7;

pub const QUESTIONS: [&str; 4] = [
    "How helpful was your partner?",
    "In this conversation, was it easy to get the information that I needed?",
    "How easy was the task?",
    "In this conversation, did you know what you could say or do at each point of the dialog?",
];

/// Index of the question whose scale runs from easy (1) to difficult (7).
pub const REVERSED_QUESTION: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuestionnaireError {
    #[error("unknown token")]
    UnknownToken,
    #[error("a questionnaire was already submitted for this token")]
    AlreadySubmitted,
    #[error("answer to Q{question} must be between 1 and 7, got {value}")]
    OutOfRange { question: usize, value: i64 },
    #[error("expected 4 answers, got {0}")]
    WrongCount(usize),
}

pub fn validate_answers(answers: &[i64]) -> Result<[u8; 4], QuestionnaireError> {
    if answers.len() != 4 {
        return Err(QuestionnaireError::WrongCount(answers.len()));
    }
    let mut out = [0u8; 4];
    for (i, &v) in answers.iter().enumerate() {
        if !(SCALE_MIN as i64..=SCALE_MAX as i64).contains(&v) {
            return Err(QuestionnaireError::OutOfRange { question: i + 1, value: v });
        }
        out[i] = v as u8;
    }
    Ok(out)
}

/// Flips the reversed question so that higher is better everywhere.
pub fn oriented(answers: [u8; 4]) -> [u8; 4] {
    let mut out = answers;
    out[REVERSED_QUESTION] = SCALE_MIN + SCALE_MAX - answers[REVERSED_QUESTION];
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(validate_answers(&[5, 4, 3, 6]).unwrap(), [5, 4, 3, 6]);
        assert_eq!(validate_answers(&[8, 4, 3, 6]), Err(QuestionnaireError::OutOfRange { question: 1, value: 8 }));
        assert_eq!(validate_answers(&[1, 0, 3, 6]), Err(QuestionnaireError::OutOfRange { question: 2, value: 0 }));
        assert_eq!(validate_answers(&[1, 2]), Err(QuestionnaireError::WrongCount(2)));
    }

    #[test]
    fn orientation() {
        assert_eq!(oriented([5, 4, 3, 6]), [5, 4, 5, 6]);
        assert_eq!(oriented([1, 1, 7, 1]), [1, 1, 1, 1]);
    }
}
