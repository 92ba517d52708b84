//! Tokenization and text normalization shared by corpus statistics, masking,
//! and the lexical metrics.
//!
//! The tokenizer is deliberately simple and language-robust: a token is a
//! maximal run of letters and digits, with an apostrophe kept when it sits
//! directly between two alphanumeric characters ("don't" is one token,
//! "'hello'" is not). Everything else separates tokens. Comparisons are done
//! on lowercased token text.

/// Byte spans `(start, end)` of every token in `text`, in order.
///
/// Spans index into the original string, so callers can splice replacements
/// without disturbing surrounding bytes.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < n {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = chars[i].0;
        let mut last = i;
        let mut j = i + 1;
        while j < n {
            if chars[j].1.is_alphanumeric() {
                last = j;
                j += 1;
            } else if is_apostrophe(chars[j].1)
                && chars[j - 1].1.is_alphanumeric()
                && j + 1 < n
                && chars[j + 1].1.is_alphanumeric()
            {
                // internal apostrophe: absorb and continue into the next run
                j += 1;
            } else {
                break;
            }
        }
        let end = if last + 1 < n { chars[last + 1].0 } else { text.len() };
        spans.push((start, end));
        i = j;
    }
    spans
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Lowercased tokens of `text`.
pub fn tokenize_lower(text: &str) -> Vec<String> {
    token_spans(text)
        .into_iter()
        .map(|(s, e)| text[s..e].to_lowercase())
        .collect()
}

/// Normalization used by exact-match: lowercase, collapse internal whitespace
/// runs to a single space, then strip every leading/trailing non-alphanumeric
/// character (punctuation and stray spaces). Idempotent.
pub fn normalize_for_exact_match(s: &str) -> String {
    let lower = s.to_lowercase();
    let collapsed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_matches(|c: char| !c.is_alphanumeric()).to_string()
}

/// Nearest-rank percentile: the value at 1-based rank `ceil(q/100 * n)` of the
/// ascending-sorted slice, clamped so P0 is the minimum and P100 the maximum.
///
/// Panics on an empty slice; callers guard with their own empty-input errors.
pub fn nearest_rank_percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let n = sorted.len();
    let rank = ((q / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// True when `token_lower` is a stopword for `language` (BCP-47-style code;
/// only the primary subtag is considered). Unknown languages fall back to the
/// English list.
pub fn is_stopword(token_lower: &str, language: &str) -> bool {
    stopwords_for(language).contains(&token_lower)
}

fn stopwords_for(language: &str) -> &'static [&'static str] {
    let primary = language.split('-').next().unwrap_or(language);
    match primary {
        "ar" => STOPWORDS_AR,
        "fr" => STOPWORDS_FR,
        _ => STOPWORDS_EN,
    }
}

// Derived from the NLTK English list; contraction fragments ("won", "didn")
// are kept so that both tokenization styles are covered.
pub const STOPWORDS_EN: &[&str] = &[
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
    "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
    "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has",
    "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
    "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above", "below", "to", "from",
    "up", "down", "in", "out", "on", "off", "over", "under", "again", "further", "then", "once",
    "here", "there", "when", "where", "why", "how", "all", "any", "both", "each", "few", "more",
    "most", "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
    "too", "very", "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
    "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn",
    "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
    "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't",
    "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn",
    "wouldn't",
];

pub const STOPWORDS_AR: &[&str] = &[
    "في", "من", "إلى", "الى", "على", "عن", "أن", "ان", "إن", "كان", "كانت", "يكون", "تكون",
    "هل", "ما", "لا", "لم", "لن", "هو", "هي", "هم", "هن", "أنت", "انت", "أنا", "انا", "نحن",
    "هذا", "هذه", "ذلك", "تلك", "الذي", "التي", "الذين", "اللاتي", "أو", "او", "ثم", "بل",
    "لكن", "إذا", "اذا", "إذ", "حيث", "كما", "مع", "عند", "قد", "كل", "بعض", "غير", "بين",
    "فوق", "تحت", "أمام", "امام", "خلف", "حتى", "منذ", "مثل", "أي", "اي", "بعد", "قبل",
    "حول", "دون", "سوف", "ليس", "ليست", "كيف", "أين", "اين", "متى", "لماذا", "ماذا", "لقد",
    "فقط", "أيضا", "ايضا", "كذلك", "هناك", "هنا", "و",
];

pub const STOPWORDS_FR: &[&str] = &[
    "le", "la", "les", "un", "une", "des", "de", "du", "au", "aux", "et", "ou", "mais", "donc",
    "or", "ni", "car", "ne", "pas", "plus", "moins", "très", "aussi", "comme", "si", "que",
    "qui", "quoi", "dont", "où", "est", "sont", "était", "étaient", "être", "avoir", "a", "ont",
    "avait", "fait", "faire", "ce", "cet", "cette", "ces", "il", "elle", "ils", "elles", "on",
    "nous", "vous", "je", "tu", "me", "te", "se", "sa", "son", "ses", "mon", "ma", "mes", "ton",
    "ta", "tes", "notre", "nos", "votre", "vos", "leur", "leurs", "y", "en", "dans", "sur",
    "sous", "pour", "par", "avec", "sans", "chez", "entre", "vers", "après", "avant", "pendant",
    "depuis", "quand", "pourquoi", "comment", "tout", "tous", "toute", "toutes", "autre",
    "autres", "même", "quelque", "quelques", "peu", "bien", "encore", "jamais", "toujours",
    "ici", "là", "alors", "ainsi", "c'est", "d'un", "d'une", "qu'il", "qu'elle", "n'est",
    "j'ai", "l'on",
];
