//! Mixed-script tokenizer shared by fusion and evaluation.

/// Split text into scoring tokens.
///
/// Each Han character is one token, a maximal run of ASCII alphanumerics
/// (Latin words, digit strings) is one token, whitespace separates runs and
/// is dropped, and any other symbol is a token by itself.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            run.push(c);
            continue;
        }
        if !run.is_empty() {
            tokens.push(std::mem::take(&mut run));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !run.is_empty() {
        tokens.push(run);
    }
    tokens
}

/// Join tokens back into text with no separators.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens.iter().map(|t| t.as_ref()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn han_characters_are_single_tokens() {
        assert_eq!(tokenize("吃了吗"), ["吃", "了", "吗"]);
    }

    #[test]
    fn ascii_runs_are_one_token() {
        assert_eq!(tokenize("GPS定位"), ["GPS", "定", "位"]);
        assert_eq!(tokenize("用5G上网"), ["用", "5G", "上", "网"]);
    }

    #[test]
    fn whitespace_separates_and_is_dropped() {
        assert_eq!(tokenize("你 好"), ["你", "好"]);
        assert_eq!(tokenize("hello world"), ["hello", "world"]);
        assert_eq!(tokenize("  \t\n"), Vec::<String>::new());
    }

    #[test]
    fn other_symbols_are_single_tokens() {
        assert_eq!(tokenize("好，要得！"), ["好", "，", "要", "得", "！"]);
        assert_eq!(tokenize("a-b"), ["a", "-", "b"]);
    }

    #[test]
    fn empty_text_yields_no_tokens() {
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn detokenize_concatenates() {
        assert_eq!(detokenize(&tokenize("GPS定位 好")), "GPS定位好");
    }
}
