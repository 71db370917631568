use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::{LanguageModel, LmError, TokenId, Vocabulary, BOS_FORM, EOS_FORM};

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    next: BTreeMap<TokenId, u64>,
}

/// Character n-gram model with additive smoothing:
///
/// `P(w | ctx) = (count(ctx, w) + alpha) / (count(ctx) + alpha * |V|)`
///
/// The context is the previous `order - 1` tokens, left-padded with BOS.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    alpha: f64,
    vocab: Vocabulary,
    counts: HashMap<Vec<TokenId>, ContextCounts>,
}

impl NgramModel {
    pub fn train<S: AsRef<str>>(corpus: &[S], order: usize, alpha: f64) -> Result<Self, LmError> {
        if corpus.is_empty() {
            return Err(LmError::EmptyCorpus);
        }
        if order == 0 {
            return Err(LmError::InvalidOrder);
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(LmError::InvalidAlpha(alpha));
        }
        let vocab = Vocabulary::from_chars(corpus.iter().flat_map(|t| t.as_ref().chars()));
        let mut model = NgramModel {
            order,
            alpha,
            vocab,
            counts: HashMap::new(),
        };
        for text in corpus {
            let mut seq = vec![Vocabulary::BOS; order - 1];
            seq.extend(model.vocab.encode(text.as_ref()));
            seq.push(Vocabulary::EOS);
            for window in seq.windows(order) {
                let (ctx, tok) = window.split_at(order - 1);
                model.add(ctx.to_vec(), tok[0], 1);
            }
        }
        Ok(model)
    }

    fn add(&mut self, ctx: Vec<TokenId>, token: TokenId, count: u64) {
        let entry = self.counts.entry(ctx).or_default();
        entry.total += count;
        *entry.next.entry(token).or_default() += count;
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn context_key(&self, context: &[TokenId]) -> Vec<TokenId> {
        let k = self.order - 1;
        let tail = &context[context.len().saturating_sub(k)..];
        let mut key = vec![Vocabulary::BOS; k - tail.len()];
        key.extend_from_slice(tail);
        key
    }

    pub fn probability(&self, context: &[TokenId], token: TokenId) -> f64 {
        let v = self.vocab.len() as f64;
        match self.counts.get(&self.context_key(context)) {
            None => 1.0 / v,
            Some(c) => {
                let n = c.next.get(&token).copied().unwrap_or(0) as f64;
                (n + self.alpha) / (c.total as f64 + self.alpha * v)
            }
        }
    }

    /// Serialises to the `ngram v1` text format. Lines are sorted by
    /// (context ids, token id), so the output is canonical.
    pub fn to_text(&self) -> String {
        let mut out = format!("ngram v1 order={} alpha={}\n", self.order, self.alpha);
        let mut contexts: Vec<_> = self.counts.iter().collect();
        contexts.sort_by(|a, b| a.0.cmp(b.0));
        for (ctx, counts) in contexts {
            let ctx_field = ctx
                .iter()
                .map(|&id| escape(self.vocab.form(id)))
                .collect::<Vec<_>>()
                .join(" ");
            for (&tok, &n) in &counts.next {
                let _ = writeln!(out, "{ctx_field}\t{}\t{n}", escape(self.vocab.form(tok)));
            }
        }
        out
    }

    pub fn parse(contents: &str) -> Result<Self, LmError> {
        let err = |line: usize, message: String| LmError::ModelFormat { line, message };
        let mut lines = contents.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let (order, alpha) = parse_header(header).map_err(|m| err(1, m))?;

        let mut rows = Vec::new();
        let mut forms = BTreeSet::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [ctx, tok, count] = fields[..] else {
                return Err(err(line_no, "expected <context>\\t<token>\\t<count>".into()));
            };
            let ctx: Vec<String> = if ctx.is_empty() {
                Vec::new()
            } else {
                ctx.split(' ')
                    .map(unescape)
                    .collect::<Result<_, _>>()
                    .map_err(|m| err(line_no, m))?
            };
            if ctx.len() != order - 1 {
                return Err(err(
                    line_no,
                    format!("context has {} tokens, expected {}", ctx.len(), order - 1),
                ));
            }
            let tok = unescape(tok).map_err(|m| err(line_no, m))?;
            let count: u64 = count
                .parse()
                .map_err(|_| err(line_no, format!("count {count:?} is not a non-negative integer")))?;
            for f in ctx.iter().chain(std::iter::once(&tok)) {
                if f != BOS_FORM && f != EOS_FORM {
                    forms.insert(f.clone());
                }
            }
            rows.push((line_no, ctx, tok, count));
        }

        let vocab = Vocabulary::new(forms);
        let mut model = NgramModel {
            order,
            alpha,
            vocab,
            counts: HashMap::new(),
        };
        let mut prev: Option<(Vec<TokenId>, TokenId)> = None;
        for (line_no, ctx, tok, count) in rows {
            let ids: Vec<TokenId> = ctx.iter().map(|f| model.vocab.id(f).expect("collected")).collect();
            let tok = model.vocab.id(&tok).expect("collected");
            let key = (ids, tok);
            if prev.as_ref().is_some_and(|p| *p >= key) {
                return Err(err(
                    line_no,
                    "entries must be strictly increasing in (context, token) order".into(),
                ));
            }
            model.add(key.0.clone(), key.1, count);
            prev = Some(key);
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), LmError> {
        std::fs::write(path, self.to_text()).map_err(|source| LmError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, LmError> {
        let contents = std::fs::read_to_string(path).map_err(|source| LmError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&contents)
    }
}

fn parse_header(header: &str) -> Result<(usize, f64), String> {
    let mut parts = header.split(' ');
    if parts.next() != Some("ngram") || parts.next() != Some("v1") {
        return Err(format!(
            "bad header {header:?}, expected `ngram v1 order=<k> alpha=<a>`"
        ));
    }
    let mut order = None;
    let mut alpha = None;
    for part in parts {
        match part.split_once('=') {
            Some(("order", v)) => order = v.parse::<usize>().ok().filter(|&o| o >= 1),
            Some(("alpha", v)) => alpha = v.parse::<f64>().ok().filter(|&a| a > 0.0 && a.is_finite()),
            _ => return Err(format!("unexpected header field {part:?}")),
        }
    }
    match (order, alpha) {
        (Some(o), Some(a)) => Ok((o, a)),
        _ => Err("header needs order >= 1 and alpha > 0".into()),
    }
}

fn escape(form: &str) -> String {
    let mut out = String::with_capacity(form.len());
    for c in form.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            ' ' => out.push_str("\\s"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(field: &str) -> Result<String, String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next() {
            Some('\\') => '\\',
            Some('s') => ' ',
            Some('t') => '\t',
            Some('n') => '\n',
            Some('r') => '\r',
            other => return Err(format!("bad escape \\{}", other.map(String::from).unwrap_or_default())),
        });
    }
    if out.is_empty() {
        return Err("empty token".into());
    }
    Ok(out)
}

impl LanguageModel for NgramModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_token_logprobs(&self, context: &[TokenId]) -> Vec<f64> {
        let v = self.vocab.len();
        match self.counts.get(&self.context_key(context)) {
            None => vec![-(v as f64).ln(); v],
            Some(c) => {
                let denom = c.total as f64 + self.alpha * v as f64;
                let mut out = vec![(self.alpha / denom).ln(); v];
                for (&id, &n) in &c.next {
                    out[id.index()] = ((n as f64 + self.alpha) / denom).ln();
                }
                out
            }
        }
    }

    /// Smoothing is monotone in the counts, so the argmax is the most
    /// frequent continuation (EOS, id 0, for unseen contexts).
    fn greedy_next(&self, context: &[TokenId]) -> TokenId {
        let Some(c) = self.counts.get(&self.context_key(context)) else {
            return TokenId(0);
        };
        let mut best = (TokenId(0), 0u64);
        for (&id, &n) in &c.next {
            if n > best.1 {
                best = (id, n);
            }
        }
        best.0
    }
}
