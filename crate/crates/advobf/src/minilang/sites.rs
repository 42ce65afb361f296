//! Transformable-site extraction and the model-token encoding.
//!
//! The model sees a program as a sequence of vocabulary ids: every lexical
//! token except the function name and the delimiters `( ) , ;`. Insert
//! transforms are pre-materialized: each statement boundary appends its
//! statement templates (with one optimizable placeholder each) after the
//! core tokens, so the whole relaxed attack state lives in one fixed-length
//! sequence. Mean pooling makes the appended position irrelevant to the
//! model; only materialization cares about the boundary a template belongs
//! to.

use super::ast::{walk_stmt_exprs, Expr, Function, Stmt};
use super::token::{tokenize, Token, TokenKind};
use super::vocab::Vocabulary;

/// The six obfuscation transforms. The first four replace existing tokens,
/// the last two insert new statements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransformKind {
    RenameLocalVar,
    RenameParam,
    RenameField,
    ReplaceBoolLiteral,
    InsertPrint,
    InsertDeadCode,
}

impl TransformKind {
    pub const ALL: [TransformKind; 6] = [
        TransformKind::RenameLocalVar,
        TransformKind::RenameParam,
        TransformKind::RenameField,
        TransformKind::ReplaceBoolLiteral,
        TransformKind::InsertPrint,
        TransformKind::InsertDeadCode,
    ];

    pub fn is_insert(self) -> bool {
        matches!(
            self,
            TransformKind::InsertPrint | TransformKind::InsertDeadCode
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::RenameLocalVar => "rename_local_var",
            TransformKind::RenameParam => "rename_param",
            TransformKind::RenameField => "rename_field",
            TransformKind::ReplaceBoolLiteral => "replace_bool_literal",
            TransformKind::InsertPrint => "insert_print",
            TransformKind::InsertDeadCode => "insert_dead_code",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        TransformKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

/// Which transforms produce sites, and which insert templates pad the
/// encoding. Padding is a property of the model's input convention: a
/// model trained with padded encodings keeps its padding even when an
/// ablation deactivates the matching sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformSet {
    active: [bool; 6],
    pad_print: bool,
    pad_dead_code: bool,
}

impl TransformSet {
    /// All six transforms active, both insert templates padded.
    pub fn full() -> Self {
        TransformSet {
            active: [true; 6],
            pad_print: true,
            pad_dead_code: true,
        }
    }

    /// Replace transforms only; encodings carry no insert templates.
    pub fn replace_only() -> Self {
        let mut active = [true; 6];
        active[4] = false;
        active[5] = false;
        TransformSet {
            active,
            pad_print: false,
            pad_dead_code: false,
        }
    }

    /// Full padding, but sites of `excluded` kinds are not extracted.
    pub fn excluding(excluded: &[TransformKind]) -> Self {
        let mut set = TransformSet::full();
        for kind in excluded {
            set.active[*kind as usize] = false;
        }
        set
    }

    /// Rebuild from explicit kind lists (checkpoint loading).
    pub fn from_parts(active: &[TransformKind], padded: &[TransformKind]) -> Self {
        let mut set = TransformSet {
            active: [false; 6],
            pad_print: padded.contains(&TransformKind::InsertPrint),
            pad_dead_code: padded.contains(&TransformKind::InsertDeadCode),
        };
        for kind in active {
            set.active[*kind as usize] = true;
        }
        set
    }

    pub fn is_active(&self, kind: TransformKind) -> bool {
        self.active[kind as usize]
    }

    pub fn pads(&self, kind: TransformKind) -> bool {
        match kind {
            TransformKind::InsertPrint => self.pad_print,
            TransformKind::InsertDeadCode => self.pad_dead_code,
            _ => false,
        }
    }

    pub fn active_kinds(&self) -> Vec<TransformKind> {
        TransformKind::ALL
            .iter()
            .copied()
            .filter(|k| self.is_active(*k))
            .collect()
    }

    pub fn padded_kinds(&self) -> Vec<TransformKind> {
        [TransformKind::InsertPrint, TransformKind::InsertDeadCode]
            .into_iter()
            .filter(|k| self.pads(*k))
            .collect()
    }
}

/// What materialization must do when a site is selected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SiteTarget {
    /// Rename every occurrence of this identifier.
    Name(String),
    /// Replace the j-th boolean literal (source order) of the given value.
    BoolOccurrence { occurrence: usize, value: bool },
    /// Insert a statement before body statement `boundary` (or at the end
    /// when `boundary == body.len()`).
    Boundary(usize),
}

/// One transformable site: the tied token positions it owns in the encoded
/// sequence and the vocabulary ids it may legally choose from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Site {
    pub id: usize,
    pub kind: TransformKind,
    /// Sorted positions sharing one decision. Replace sites tie every
    /// occurrence; insert sites own exactly their placeholder.
    pub token_indices: Vec<usize>,
    /// Sorted legal replacement ids over the vocabulary.
    pub candidates: Vec<usize>,
    pub target: SiteTarget,
}

impl Site {
    pub fn allows(&self, token_id: usize) -> bool {
        self.candidates.binary_search(&token_id).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteMap {
    pub sites: Vec<Site>,
    /// For each encoded token index, the site owning it (if any).
    pub site_of_token: Vec<Option<usize>>,
    /// Number of core (non-template) tokens.
    pub n_core: usize,
}

impl SiteMap {
    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, id: usize) -> Option<&Site> {
        self.sites.get(id)
    }
}

/// A program in model space: padded vocabulary ids plus its site map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedProgram {
    pub token_ids: Vec<usize>,
    pub sitemap: SiteMap,
    /// Statement boundaries available to insert transforms.
    pub boundaries: usize,
}

impl EncodedProgram {
    pub fn n(&self) -> usize {
        self.token_ids.len()
    }
}

/// The model-token view: all lexical tokens except the function name and
/// the delimiters `( ) , ;`.
pub fn core_model_tokens(func: &Function) -> Vec<Token> {
    let rendered = super::ast::unparse(func);
    let raw = tokenize(&rendered).expect("unparse output lexes");
    raw.into_iter()
        .enumerate()
        .filter(|(i, t)| *i != 1 && !t.is_delimiter())
        .map(|(_, t)| t)
        .collect()
}

fn positions_of(tokens: &[Token], kind: TokenKind, text: &str) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.kind == kind && t.text == text)
        .map(|(i, _)| i)
        .collect()
}

/// Names visible to the j-th boolean literal: parameters plus targets of
/// unconditional assignments in strictly earlier top-level statements.
/// Conditionally assigned names are excluded so the expansion can never
/// read an unbound variable at run time.
fn bool_scopes(func: &Function) -> Vec<Vec<String>> {
    let mut scopes = Vec::new();
    let mut bound: Vec<String> = func.params.clone();
    for stmt in &func.body {
        let mut count = 0usize;
        walk_stmt_exprs(stmt, &mut |e| {
            if matches!(e, Expr::Bool(_)) {
                count += 1;
            }
        });
        for _ in 0..count {
            scopes.push(bound.clone());
        }
        if let Stmt::Assign { target, .. } = stmt {
            if !bound.contains(target) {
                bound.push(target.clone());
            }
        }
    }
    scopes
}

/// Encode `func` and extract its site map under the given transform set.
/// Sites whose candidate mask would be empty are dropped.
pub fn encode_with_sites(
    func: &Function,
    vocab: &Vocabulary,
    transforms: &TransformSet,
) -> EncodedProgram {
    let core = core_model_tokens(func);
    let n_core = core.len();
    let mut token_ids: Vec<usize> = core.iter().map(|t| vocab.id_or_unk(t.vocab_text())).collect();

    let program_idents = func.all_identifiers();
    let identifier_ids = vocab.identifier_ids();
    let rename_candidates: Vec<usize> = identifier_ids
        .iter()
        .copied()
        .filter(|&id| !program_idents.iter().any(|n| n == vocab.token(id)))
        .collect();
    let insert_candidates = identifier_ids.clone();
    let int_ids = vocab.int_literal_ids();

    let mut sites: Vec<Site> = Vec::new();
    let push_site =
        |sites: &mut Vec<Site>, kind, token_indices: Vec<usize>, candidates: Vec<usize>, target| {
            if candidates.is_empty() || token_indices.is_empty() {
                return;
            }
            sites.push(Site {
                id: sites.len(),
                kind,
                token_indices,
                candidates,
                target,
            });
        };

    if transforms.is_active(TransformKind::RenameParam) {
        for name in &func.params {
            push_site(
                &mut sites,
                TransformKind::RenameParam,
                positions_of(&core, TokenKind::Identifier, name),
                rename_candidates.clone(),
                SiteTarget::Name(name.clone()),
            );
        }
    }
    if transforms.is_active(TransformKind::RenameLocalVar) {
        for name in func.local_names() {
            push_site(
                &mut sites,
                TransformKind::RenameLocalVar,
                positions_of(&core, TokenKind::Identifier, &name),
                rename_candidates.clone(),
                SiteTarget::Name(name),
            );
        }
    }
    if transforms.is_active(TransformKind::RenameField) {
        for name in func.field_names() {
            push_site(
                &mut sites,
                TransformKind::RenameField,
                positions_of(&core, TokenKind::FieldName, &name),
                rename_candidates.clone(),
                SiteTarget::Name(name),
            );
        }
    }
    if transforms.is_active(TransformKind::ReplaceBoolLiteral) {
        let scopes = bool_scopes(func);
        let bool_positions: Vec<(usize, bool)> = core
            .iter()
            .enumerate()
            .filter(|(_, t)| t.kind == TokenKind::BoolLiteral)
            .map(|(i, t)| (i, t.text == "True"))
            .collect();
        debug_assert_eq!(scopes.len(), bool_positions.len());
        for (occurrence, (pos, value)) in bool_positions.into_iter().enumerate() {
            // in-scope names keep the expansion bound at run time without
            // injecting new tokens; integer literals are the fallback when
            // nothing is in scope
            let mut candidates: Vec<usize> = scopes[occurrence]
                .iter()
                .filter_map(|name| vocab.id(name))
                .collect();
            if candidates.is_empty() {
                candidates.extend(int_ids.iter().copied());
            }
            candidates.sort_unstable();
            candidates.dedup();
            push_site(
                &mut sites,
                TransformKind::ReplaceBoolLiteral,
                vec![pos],
                candidates,
                SiteTarget::BoolOccurrence { occurrence, value },
            );
        }
    }

    let boundaries = func.body.len() + 1;
    let ph = vocab.placeholder_id();
    for boundary in 0..boundaries {
        if transforms.pads(TransformKind::InsertPrint) {
            let base = token_ids.len();
            token_ids.push(vocab.id_or_unk("print"));
            token_ids.push(ph);
            if transforms.is_active(TransformKind::InsertPrint) {
                push_site(
                    &mut sites,
                    TransformKind::InsertPrint,
                    vec![base + 1],
                    insert_candidates.clone(),
                    SiteTarget::Boundary(boundary),
                );
            }
        }
        if transforms.pads(TransformKind::InsertDeadCode) {
            let base = token_ids.len();
            for tok in ["if", "<ph>", "!=", "<ph>", ":", "_dead", "=", "1"] {
                token_ids.push(vocab.id_or_unk(tok));
            }
            // only the first placeholder is optimizable; materialization
            // mirrors the chosen token into both string positions
            if transforms.is_active(TransformKind::InsertDeadCode) {
                push_site(
                    &mut sites,
                    TransformKind::InsertDeadCode,
                    vec![base + 1],
                    insert_candidates.clone(),
                    SiteTarget::Boundary(boundary),
                );
            }
        }
    }

    let mut site_of_token = vec![None; token_ids.len()];
    for site in &sites {
        for &idx in &site.token_indices {
            debug_assert!(site_of_token[idx].is_none(), "token owned by two sites");
            site_of_token[idx] = Some(site.id);
        }
    }

    EncodedProgram {
        token_ids,
        sitemap: SiteMap {
            sites,
            site_of_token,
            n_core,
        },
        boundaries,
    }
}
