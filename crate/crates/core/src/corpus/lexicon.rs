//! Closed vocabulary with hand-coded binary semantic features.
//!
//! File format (UTF-8, tab separated):
//!
//! ```text
//! # gestalt-lexicon v1	tokens=72	features=176
//! # roles=agent,action,patient,location,situation
//! woman	agent	person,active,adult,female,woman
//! during	function-word
//! ```
//!
//! The first line is mandatory and declares the expected token and feature
//! counts. An optional `# roles=` line names the role units used as probes;
//! they are placed first in the feature inventory. Other `#` lines are
//! comments. The inventory is the ordered union of role units and the
//! features in file order; when it is smaller than the declared size it is
//! padded with reserved labels.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Agent,
    Action,
    Location,
    Situation,
    Food,
    Drink,
    Game,
    Garment,
    Readable,
    Flower,
    Tree,
    Bird,
    Fish,
    FunctionWord,
}

impl Category {
    pub const ALL: [Category; 14] = [
        Category::Agent,
        Category::Action,
        Category::Location,
        Category::Situation,
        Category::Food,
        Category::Drink,
        Category::Game,
        Category::Garment,
        Category::Readable,
        Category::Flower,
        Category::Tree,
        Category::Bird,
        Category::Fish,
        Category::FunctionWord,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Agent => "agent",
            Category::Action => "action",
            Category::Location => "location",
            Category::Situation => "situation",
            Category::Food => "food",
            Category::Drink => "drink",
            Category::Game => "game",
            Category::Garment => "garment",
            Category::Readable => "readable",
            Category::Flower => "flower",
            Category::Tree => "tree",
            Category::Bird => "bird",
            Category::Fish => "fish",
            Category::FunctionWord => "function-word",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Object categories that can fill the patient role.
    pub fn is_object(self) -> bool {
        matches!(
            self,
            Category::Food
                | Category::Drink
                | Category::Game
                | Category::Garment
                | Category::Readable
                | Category::Flower
                | Category::Tree
                | Category::Bird
                | Category::Fish
        )
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Thematic roles queried by the probe layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Agent,
    Action,
    Patient,
    Location,
    Situation,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Agent,
        Role::Action,
        Role::Patient,
        Role::Location,
        Role::Situation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Agent => "agent",
            Role::Action => "action",
            Role::Patient => "patient",
            Role::Location => "location",
            Role::Situation => "situation",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.as_str() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexeme {
    pub token: String,
    pub category: Category,
    /// Sorted, deduplicated feature indices.
    pub features: Vec<FeatureId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureInventory {
    labels: Vec<String>,
    index: HashMap<String, FeatureId>,
    reserved: usize,
}

impl FeatureInventory {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: FeatureId) -> &str {
        &self.labels[id.0]
    }

    pub fn get(&self, label: &str) -> Option<FeatureId> {
        self.index.get(label).copied()
    }

    /// Number of padding labels added to reach the declared size.
    pub fn reserved(&self) -> usize {
        self.reserved
    }

    fn push(&mut self, label: &str) -> FeatureId {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = FeatureId(self.labels.len());
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        id
    }
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    lexemes: Vec<Lexeme>,
    inventory: FeatureInventory,
    token_index: HashMap<String, TokenId>,
    roles: Option<[FeatureId; 5]>,
}

impl Lexicon {
    pub fn lexemes(&self) -> &[Lexeme] {
        &self.lexemes
    }

    pub fn inventory(&self) -> &FeatureInventory {
        &self.inventory
    }

    pub fn len(&self) -> usize {
        self.lexemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lexemes.is_empty()
    }

    pub fn lexeme(&self, id: TokenId) -> &Lexeme {
        &self.lexemes[id.0]
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.lexemes[id.0].token
    }

    pub fn token_id(&self, token: &str) -> Option<TokenId> {
        self.token_index.get(token).copied()
    }

    /// Looks up `token` and checks its category.
    pub fn expect(&self, token: &str, category: Category) -> Result<TokenId> {
        let id = self
            .token_id(token)
            .ok_or_else(|| Error::Config(format!("unknown token {token:?}")))?;
        let found = self.lexeme(id).category;
        if found != category {
            return Err(Error::Config(format!(
                "token {token:?} has category {found}, expected {category}"
            )));
        }
        Ok(id)
    }

    pub fn role_unit(&self, role: Role) -> Option<FeatureId> {
        self.roles.map(|r| r[role.index()])
    }

    /// The feature naming the token itself, e.g. the `woman` unit for "woman".
    pub fn identity_feature(&self, id: TokenId) -> Option<FeatureId> {
        self.inventory.get(self.token(id))
    }

    /// First token of the given category, used for function words.
    pub fn first_of(&self, category: Category) -> Option<TokenId> {
        self.lexemes
            .iter()
            .position(|l| l.category == category)
            .map(TokenId)
    }

    pub fn tokens_of(&self, category: Category) -> impl Iterator<Item = TokenId> + '_ {
        self.lexemes
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.category == category)
            .map(|(i, _)| TokenId(i))
    }

    /// Dense 0/1 feature vector for a token.
    pub fn feature_vector(&self, id: TokenId) -> Vec<f64> {
        let mut v = vec![0.0; self.inventory.len()];
        for f in &self.lexeme(id).features {
            v[f.0] = 1.0;
        }
        v
    }
}

struct Header {
    tokens: usize,
    features: usize,
}

fn parse_header(line: &str, path: &str) -> Result<Header> {
    let mut fields = line.split('\t');
    let magic = fields.next().unwrap_or_default();
    if magic.trim() != "# gestalt-lexicon v1" {
        return Err(Error::parse(path, 1, "missing `# gestalt-lexicon v1` header"));
    }
    let mut tokens = None;
    let mut features = None;
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::parse(path, 1, format!("malformed header field {field:?}")))?;
        let value: usize = value
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, 1, format!("non-numeric header value {value:?}")))?;
        match key.trim() {
            "tokens" => tokens = Some(value),
            "features" => features = Some(value),
            other => return Err(Error::parse(path, 1, format!("unknown header key {other:?}"))),
        }
    }
    match (tokens, features) {
        (Some(tokens), Some(features)) => Ok(Header { tokens, features }),
        _ => Err(Error::parse(path, 1, "header must declare tokens= and features=")),
    }
}

/// Parses lexicon text. `origin` is used in error messages.
pub fn parse_lexicon(text: &str, origin: &str) -> Result<Lexicon> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => parse_header(line, origin)?,
        None => return Err(Error::parse(origin, 1, "empty lexicon file")),
    };

    let mut inventory = FeatureInventory {
        labels: Vec::new(),
        index: HashMap::new(),
        reserved: 0,
    };
    let mut roles = None;
    let mut lexemes: Vec<Lexeme> = Vec::new();
    let mut token_index = HashMap::new();

    for (i, raw) in lines {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(list) = comment.trim().strip_prefix("roles=") {
                if roles.is_some() || !lexemes.is_empty() {
                    return Err(Error::parse(origin, lineno, "roles must be declared once, before any token"));
                }
                let labels: Vec<&str> = list.split(',').map(str::trim).collect();
                if labels.len() != Role::ALL.len() {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("expected {} role units, found {}", Role::ALL.len(), labels.len()),
                    ));
                }
                let mut ids = [FeatureId(0); 5];
                for (slot, label) in ids.iter_mut().zip(labels) {
                    if label.is_empty() {
                        return Err(Error::parse(origin, lineno, "empty role label"));
                    }
                    *slot = inventory.push(label);
                }
                roles = Some(ids);
            }
            continue;
        }

        let mut cols = line.split('\t');
        let token = cols.next().unwrap_or_default().trim();
        let category = cols.next().map(str::trim).unwrap_or_default();
        let features = cols.next().map(str::trim).unwrap_or_default();
        if cols.next().is_some() {
            return Err(Error::parse(origin, lineno, "too many columns"));
        }
        if token.is_empty() {
            return Err(Error::parse(origin, lineno, "empty token"));
        }
        let category = Category::parse(category)
            .ok_or_else(|| Error::parse(origin, lineno, format!("unknown category {category:?}")))?;
        if token_index.contains_key(token) {
            return Err(Error::parse(origin, lineno, format!("duplicate token {token:?}")));
        }

        let mut ids: Vec<FeatureId> = features
            .split(',')
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .map(|f| inventory.push(f))
            .collect();
        if category == Category::FunctionWord && !ids.is_empty() {
            return Err(Error::parse(origin, lineno, "function words carry no output features"));
        }
        if category != Category::FunctionWord && ids.is_empty() {
            return Err(Error::parse(origin, lineno, format!("token {token:?} has no features")));
        }
        ids.sort_unstable();
        ids.dedup();

        token_index.insert(token.to_string(), TokenId(lexemes.len()));
        lexemes.push(Lexeme {
            token: token.to_string(),
            category,
            features: ids,
        });
    }

    if lexemes.is_empty() {
        return Err(Error::parse(origin, 1, "lexicon declares no tokens"));
    }
    if lexemes.len() != header.tokens {
        return Err(Error::parse(
            origin,
            1,
            format!(
                "header declares {} tokens but the file lists {}",
                header.tokens,
                lexemes.len()
            ),
        ));
    }
    let used = inventory.len();
    if used > header.features {
        return Err(Error::parse(
            origin,
            1,
            format!(
                "{used} distinct features referenced but only {} declared",
                header.features
            ),
        ));
    }
    if used < header.features {
        let pad = header.features - used;
        log::info!(
            "lexicon {origin}: {used} distinct feature labels, padding {pad} reserved units to the declared {}",
            header.features
        );
        for k in 0..pad {
            inventory.push(&format!("reserved-{k:03}"));
        }
        inventory.reserved = pad;
    }

    Ok(Lexicon {
        lexemes,
        inventory,
        token_index,
        roles,
    })
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon(&text, &path.display().to_string())
}

/// The lexicon shipped with the crate.
pub fn default_lexicon() -> Lexicon {
    parse_lexicon(DEFAULT_LEXICON, "data/lexicon.tsv").expect("bundled lexicon is valid")
}

pub const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.tsv");
