//! Dependency-parsed node text read from CoNLL-U style blocks.
//!
//! Only ID, FORM, LEMMA, UPOS, HEAD and DEPREL are used. Multiword-token
//! ranges (`3-4`) and empty nodes (`3.1`) are skipped. Comment lines
//! recognised per block:
//!
//! * `# text = …` the sentence text,
//! * `# node = …` the full node text when it differs from the sentence
//!   (multi-sentence nodes),
//! * `# node_id = …` an identifier; consecutive blocks sharing one id are
//!   further sentences of the same node and are dropped.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("cannot open {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("read failed: {0}")]
    Read(#[source] std::io::Error),
    #[error("block {block} (line {line}): {reason}")]
    Block {
        block: usize,
        line: usize,
        reason: String,
    },
    #[error("token index {index} out of range 1..={len}")]
    TokenOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// Governor index, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(index: usize, form: &str, lemma: &str, upos: &str, head: usize, deprel: &str) -> Self {
        Token {
            index,
            form: form.to_string(),
            lemma: lemma.to_string(),
            upos: upos.to_string(),
            head,
            deprel: deprel.to_string(),
        }
    }

    /// Noun or proper noun: the tokens that can root an entity.
    pub fn is_nominal(&self) -> bool {
        self.upos == "NOUN" || self.upos == "PROPN"
    }
}

/// One node's parse, validated as a single rooted tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedNode {
    pub id: Option<String>,
    text: String,
    tokens: Vec<Token>,
    /// Byte range of each token's form inside `text`.
    offsets: Vec<(usize, usize)>,
    spans: Vec<(usize, usize)>,
}

impl ParsedNode {
    /// Validates the tree and aligns the token forms to `text`. With no
    /// text, the forms joined by single spaces are used.
    pub fn new(text: Option<&str>, tokens: Vec<Token>) -> Result<Self, String> {
        let n = tokens.len();
        if n == 0 {
            return Err("block has no tokens".into());
        }
        let mut roots = 0;
        for (i, t) in tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(format!("token ids not sequential at {}", t.index));
            }
            if t.head > n {
                return Err(format!("HEAD {} of token {} out of range 0..={n}", t.head, t.index));
            }
            if t.head == t.index {
                return Err(format!("token {} is its own head", t.index));
            }
            if t.head == 0 {
                roots += 1;
            }
        }
        if roots != 1 {
            return Err(format!("expected exactly one root, found {roots}"));
        }
        for t in &tokens {
            let mut cur = t.index;
            let mut steps = 0;
            while cur != 0 {
                cur = tokens[cur - 1].head;
                steps += 1;
                if steps > n {
                    return Err(format!("cycle through token {}", t.index));
                }
            }
        }

        let text = match text {
            Some(t) => t.to_string(),
            None => tokens.iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" "),
        };
        let offsets = align(&text, &tokens)?;
        let spans = compute_spans(&tokens);
        Ok(ParsedNode {
            id: None,
            text,
            tokens,
            offsets,
            spans,
        })
    }

    /// Builds a node from `(form, upos, head)` triples with lemma = form.
    pub fn from_words(words: &[(&str, &str, usize)]) -> Result<Self, String> {
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, &(form, upos, head))| Token::new(i + 1, form, form, upos, head, "dep"))
            .collect();
        Self::new(None, tokens)
    }

    /// Node text as it appears in the CKG.
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The 1-based token `k`.
    pub fn token(&self, k: usize) -> &Token {
        &self.tokens[k - 1]
    }

    /// Byte range in [`text`](Self::text) covered by tokens `l..=r`.
    pub fn byte_range(&self, l: usize, r: usize) -> (usize, usize) {
        (self.offsets[l - 1].0, self.offsets[r - 1].1)
    }

    /// `(L, R)`: lowest and highest index in the subtree rooted at `k`.
    pub fn subtree_span(&self, k: usize) -> Result<(usize, usize), ParseError> {
        if k == 0 || k > self.len() {
            return Err(ParseError::TokenOutOfRange {
                index: k,
                len: self.len(),
            });
        }
        Ok(self.spans[k - 1])
    }

    /// Subtree spans of every token, indexed by `k - 1`.
    pub fn subtree_spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    /// Forms joined by single spaces.
    pub fn joined_forms(&self) -> String {
        self.tokens.iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" ")
    }
}

// Every token extends the span of each of its ancestors.
fn compute_spans(tokens: &[Token]) -> Vec<(usize, usize)> {
    let mut spans: Vec<(usize, usize)> = tokens.iter().map(|t| (t.index, t.index)).collect();
    for t in tokens {
        let mut cur = t.head;
        while cur != 0 {
            let span = &mut spans[cur - 1];
            span.0 = span.0.min(t.index);
            span.1 = span.1.max(t.index);
            cur = tokens[cur - 1].head;
        }
    }
    spans
}

// Locates each form in `text`, skipping whitespace between tokens.
fn align(text: &str, tokens: &[Token]) -> Result<Vec<(usize, usize)>, String> {
    let mut offsets = Vec::with_capacity(tokens.len());
    let mut pos = 0;
    for t in tokens {
        let rest = &text[pos..];
        let start = pos + (rest.len() - rest.trim_start().len());
        if !text[start..].starts_with(t.form.as_str()) || t.form.is_empty() {
            return Err(format!(
                "token {} `{}` does not match the node text at byte {start}",
                t.index, t.form
            ));
        }
        let end = start + t.form.len();
        offsets.push((start, end));
        pos = end;
    }
    Ok(offsets)
}

/// Streaming reader yielding one [`ParsedNode`] per node.
pub struct ConlluReader<R> {
    reader: R,
    line_no: usize,
    block_no: usize,
    lemmatized: bool,
    last_id: Option<String>,
    dropped_sentences: usize,
    buf: String,
}

impl ConlluReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>, lemmatized: bool) -> Result<Self, ParseError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| ParseError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::new(BufReader::new(file), lemmatized))
    }
}

#[derive(Default)]
struct RawBlock {
    start_line: usize,
    text: Option<String>,
    node_text: Option<String>,
    node_id: Option<String>,
    rows: Vec<(usize, String)>,
}

impl<R: BufRead> ConlluReader<R> {
    /// With `lemmatized`, the FORM column doubles as the lemma.
    pub fn new(reader: R, lemmatized: bool) -> Self {
        Self {
            reader,
            line_no: 0,
            block_no: 0,
            lemmatized,
            last_id: None,
            dropped_sentences: 0,
            buf: String::new(),
        }
    }

    /// Continuation sentences of multi-sentence nodes skipped so far.
    pub fn dropped_sentences(&self) -> usize {
        self.dropped_sentences
    }

    fn read_block(&mut self) -> Result<Option<RawBlock>, ParseError> {
        let mut block = RawBlock::default();
        let mut started = false;
        loop {
            self.buf.clear();
            let n = self.reader.read_line(&mut self.buf).map_err(ParseError::Read)?;
            if n == 0 {
                return Ok(started.then_some(block));
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                if started {
                    return Ok(Some(block));
                }
                continue;
            }
            if !started {
                started = true;
                block.start_line = self.line_no;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.split_once('=') {
                    let value = value.trim().to_string();
                    match key.trim() {
                        "text" => block.text = Some(value),
                        "node" => block.node_text = Some(value),
                        "node_id" => block.node_id = Some(value),
                        _ => {}
                    }
                }
                continue;
            }
            block.rows.push((self.line_no, line.to_string()));
        }
    }

    fn parse_block(&self, block: RawBlock) -> Result<ParsedNode, ParseError> {
        let err = |line: usize, reason: String| ParseError::Block {
            block: self.block_no,
            line,
            reason,
        };
        let mut tokens = Vec::with_capacity(block.rows.len());
        for (line, row) in &block.rows {
            let cols: Vec<&str> = row.split('\t').collect();
            if cols.len() < 8 {
                return Err(err(*line, format!("expected at least 8 columns, found {}", cols.len())));
            }
            if cols[0].contains(['-', '.']) {
                continue;
            }
            let index: usize = cols[0]
                .parse()
                .map_err(|_| err(*line, format!("bad ID `{}`", cols[0])))?;
            let head: usize = cols[6]
                .parse()
                .map_err(|_| err(*line, format!("bad HEAD `{}`", cols[6])))?;
            let form = cols[1];
            let lemma = if self.lemmatized || cols[2] == "_" { form } else { cols[2] };
            tokens.push(Token::new(index, form, lemma, cols[3], head, cols[7]));
        }
        let text = block.node_text.as_deref().or(block.text.as_deref());
        let mut node = ParsedNode::new(text, tokens).map_err(|reason| err(block.start_line, reason))?;
        node.id = block.node_id;
        Ok(node)
    }
}

impl<R: BufRead> Iterator for ConlluReader<R> {
    type Item = Result<ParsedNode, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let block = match self.read_block() {
                Ok(Some(b)) => b,
                Ok(None) => return None,
                Err(e) => return Some(Err(e)),
            };
            self.block_no += 1;
            if block.node_id.is_some() && block.node_id == self.last_id {
                self.dropped_sentences += 1;
                continue;
            }
            self.last_id = block.node_id.clone();
            return Some(self.parse_block(block));
        }
    }
}

/// Parses keyed by node text; the first parse of a text wins.
#[derive(Debug, Clone, Default)]
pub struct ParseIndex {
    by_text: HashMap<String, ParsedNode>,
}

impl ParseIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, node: ParsedNode) -> bool {
        if self.by_text.contains_key(node.text()) {
            return false;
        }
        self.by_text.insert(node.text().to_string(), node);
        true
    }

    pub fn get(&self, text: &str) -> Option<&ParsedNode> {
        self.by_text.get(text)
    }

    pub fn len(&self) -> usize {
        self.by_text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_text.is_empty()
    }

    /// Reads every block of a file; a malformed block aborts.
    pub fn load(path: impl AsRef<Path>, lemmatized: bool) -> Result<Self, ParseError> {
        let mut index = Self::new();
        for node in ConlluReader::open(path, lemmatized)? {
            index.insert(node?);
        }
        Ok(index)
    }
}

impl FromIterator<ParsedNode> for ParseIndex {
    fn from_iter<I: IntoIterator<Item = ParsedNode>>(iter: I) -> Self {
        let mut index = Self::new();
        for node in iter {
            index.insert(node);
        }
        index
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(src: &str) -> Vec<Result<ParsedNode, ParseError>> {
        ConlluReader::new(src.as_bytes(), false).collect()
    }

    const DOG: &str = "# text = the big dog barks
1\tthe\tthe\tDET\tDT\t_\t3\tdet\t_\t_
2\tbig\tbig\tADJ\tJJ\t_\t3\tamod\t_\t_
3\tdog\tdog\tNOUN\tNN\t_\t4\tnsubj\t_\t_
4\tbarks\tbark\tVERB\tVBZ\t_\t0\troot\t_\t_
";

    #[test]
    fn single_token_block() {
        let nodes = read("1\tI\tI\tPRON\tPRP\t_\t0\troot\t_\t_\n");
        let node = nodes[0].as_ref().unwrap();
        assert_eq!(node.len(), 1);
        assert_eq!(node.token(1).head, 0);
        assert_eq!(node.text(), "I");
    }

    #[test]
    fn four_token_tree() {
        let nodes = read(DOG);
        let node = nodes[0].as_ref().unwrap();
        assert_eq!(node.len(), 4);
        assert_eq!(node.subtree_span(3).unwrap(), (1, 3));
        assert_eq!(node.subtree_span(4).unwrap(), (1, 4));
        assert_eq!(node.subtree_span(1).unwrap(), (1, 1));
        assert!(node.subtree_span(0).is_err());
        assert!(node.subtree_span(5).is_err());
        assert_eq!(node.joined_forms(), node.text());
    }

    #[test]
    fn out_of_range_head_names_the_block() {
        let src = format!("{DOG}\n1\tI\tI\tPRON\t_\t_\t99\troot\t_\t_\n");
        let nodes = read(&src);
        assert!(nodes[0].is_ok());
        let err = nodes[1].as_ref().unwrap_err().to_string();
        assert!(err.contains("block 2"), "{err}");
        assert!(err.contains("99"), "{err}");
    }

    #[test]
    fn cycles_and_multiple_roots_rejected() {
        let cyc = "1\ta\ta\tX\t_\t_\t2\tdep\t_\t_\n2\tb\tb\tX\t_\t_\t1\tdep\t_\t_\n";
        assert!(read(cyc)[0].as_ref().unwrap_err().to_string().contains("root"));
        let cyc3 = "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t3\tdep\t_\t_\n3\tc\tc\tX\t_\t_\t2\tdep\t_\t_\n";
        assert!(read(cyc3)[0].as_ref().unwrap_err().to_string().contains("cycle"));
        let two = "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t0\troot\t_\t_\n";
        assert!(read(two)[0].is_err());
    }

    #[test]
    fn text_alignment_keeps_original_spacing() {
        let src = "# text = PersonX's dog\n1\tPersonX\tPersonX\tPROPN\t_\t_\t3\tnmod:poss\t_\t_\n2\t's\t's\tPART\t_\t_\t1\tcase\t_\t_\n3\tdog\tdog\tNOUN\t_\t_\t0\troot\t_\t_\n";
        let node = read(src).remove(0).unwrap();
        assert_eq!(node.byte_range(3, 3), (10, 13));
        assert_eq!(node.byte_range(1, 2), (0, 9));
        let bad = "# text = something else\n1\tdog\tdog\tNOUN\t_\t_\t0\troot\t_\t_\n";
        assert!(read(bad)[0].is_err());
    }

    #[test]
    fn multi_sentence_nodes_keep_first_sentence() {
        let src = "# node_id = n1\n# node = I am tired. I sleep\n# text = I am tired.\n\
1\tI\tI\tPRON\t_\t_\t3\tnsubj\t_\t_\n2\tam\tbe\tAUX\t_\t_\t3\tcop\t_\t_\n3\ttired\ttired\tADJ\t_\t_\t0\troot\t_\t_\n4\t.\t.\tPUNCT\t_\t_\t3\tpunct\t_\t_\n\n\
# node_id = n1\n# text = I sleep\n1\tI\tI\tPRON\t_\t_\t2\tnsubj\t_\t_\n2\tsleep\tsleep\tVERB\t_\t_\t0\troot\t_\t_\n\n\
# node_id = n2\n1\tgo\tgo\tVERB\t_\t_\t0\troot\t_\t_\n";
        let mut reader = ConlluReader::new(src.as_bytes(), false);
        let nodes: Vec<ParsedNode> = reader.by_ref().map(Result::unwrap).collect();
        assert_eq!(nodes.len(), 2);
        assert_eq!(nodes[0].text(), "I am tired. I sleep");
        assert_eq!(nodes[0].id.as_deref(), Some("n1"));
        assert_eq!(reader.dropped_sentences(), 1);
    }

    #[test]
    fn multiword_ranges_and_lemmatized_mode() {
        let src = "# text = dogs run\n1-2\tdogs run\t_\t_\t_\t_\t_\t_\t_\t_\n1\tdogs\tdog\tNOUN\t_\t_\t2\tnsubj\t_\t_\n2\trun\trun\tVERB\t_\t_\t0\troot\t_\t_\n";
        let surface = read(src).remove(0).unwrap();
        assert_eq!(surface.token(1).lemma, "dog");
        let lem: Vec<_> = ConlluReader::new(src.as_bytes(), true).collect();
        assert_eq!(lem[0].as_ref().unwrap().token(1).lemma, "dogs");
    }
}
