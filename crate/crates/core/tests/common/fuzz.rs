use narrlab::morph::prompts;
use proptest::prelude::*;

const WORDS: [&str; 8] = [
    "revenue", "grew", "strongly", "margin", "we", "expect", "demand", "outlook",
];
const NUMBERS: [&str; 8] = ["12.5%", "$3.4", "Q4", "2023", "1,200", "7x", "0.35", "FY24"];

#[derive(Debug, Clone)]
pub enum Mutation {
    AlterDigit(usize),
    DropNumber(usize),
    InsertNumber(usize, usize),
    DuplicateNumber(usize),
    SwapWord(usize, usize),
}

impl Mutation {
    pub fn touches_numerals(&self) -> bool {
        !matches!(self, Mutation::SwapWord(..))
    }
}

pub fn text() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop_oneof![
            3 => (0..WORDS.len()).prop_map(|i| WORDS[i].to_string()),
            1 => (0..NUMBERS.len()).prop_map(|i| NUMBERS[i].to_string()),
        ],
        4..40,
    )
    .prop_filter("needs a numeral", |t| {
        t.iter().any(|w| w.chars().any(|c| c.is_ascii_digit()))
    })
}

pub fn mutation() -> impl Strategy<Value = Mutation> {
    prop_oneof![
        any::<usize>().prop_map(Mutation::AlterDigit),
        any::<usize>().prop_map(Mutation::DropNumber),
        (any::<usize>(), 0..NUMBERS.len()).prop_map(|(a, b)| Mutation::InsertNumber(a, b)),
        any::<usize>().prop_map(Mutation::DuplicateNumber),
        (any::<usize>(), 0..WORDS.len()).prop_map(|(a, b)| Mutation::SwapWord(a, b)),
    ]
}

pub fn apply(tokens: &[String], m: &Mutation) -> Vec<String> {
    let mut t = tokens.to_vec();
    let numeric: Vec<usize> = (0..t.len())
        .filter(|&i| t[i].chars().any(|c| c.is_ascii_digit()))
        .collect();
    let words: Vec<usize> = (0..t.len()).filter(|i| !numeric.contains(i)).collect();
    match *m {
        Mutation::AlterDigit(k) => {
            let i = numeric[k % numeric.len()];
            let pos = t[i].find(|c: char| c.is_ascii_digit()).unwrap();
            let d = t[i].as_bytes()[pos] - b'0';
            let nd = char::from(b'0' + (d + 1) % 10);
            t[i].replace_range(pos..pos + 1, &nd.to_string());
        }
        Mutation::DropNumber(k) => {
            t.remove(numeric[k % numeric.len()]);
        }
        Mutation::InsertNumber(k, n) => t.insert(k % (t.len() + 1), NUMBERS[n].to_string()),
        Mutation::DuplicateNumber(k) => {
            let i = numeric[k % numeric.len()];
            let v = t[i].clone();
            t.insert(i, v);
        }
        Mutation::SwapWord(k, w) => {
            if !words.is_empty() {
                t[words[k % words.len()]] = format!("{}ly", WORDS[w]);
            }
        }
    }
    t
}

fn paper() -> String {
    std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../paper.md")).unwrap()
}

/// Every registry body against the matching appendix item of the paper.
pub fn registry_mismatches() -> Vec<String> {
    let paper = paper();
    let mut bad = Vec::new();
    for (dim, body) in prompts::registry() {
        let item = format!("\\item[{}:]", dim.label());
        let Some(at) = paper.find(&item) else {
            bad.push(format!("{item} missing"));
            continue;
        };
        let start = at + paper[at..].find("\\texttt{").unwrap() + "\\texttt{".len();
        let end = start + paper[start..].find("}\n").unwrap();
        if body != &paper[start..end] {
            bad.push(dim.label().to_string());
        }
    }
    bad
}

/// The verbatim judge block of the paper.
pub fn paper_judge_template() -> String {
    let paper = paper();
    let start = paper.find("\\begin{verbatim}\n").unwrap() + "\\begin{verbatim}\n".len();
    let end = start + paper[start..].find("\n\\end{verbatim}").unwrap();
    paper[start..end].to_string()
}
