//! The postal-vote model family.
//!
//! A configuration fixes the number of voters, municipal offices (MO),
//! electoral commissions (EC) and candidates. Agent ids follow the address
//! partition of the model: commissions are `-NMO-NEC..=-NMO-1`, offices
//! `-NMO..=-1` and voters `1..=NV`, so `0` always means "nobody".
//!
//! Voters register an intention with their office, receive an election
//! package, fill in the ballot and the voting card, and return the envelope
//! by post through an office or by hand to a commission. Commissions
//! validate returned envelopes against the voters' list, tally, and report
//! to their office, which accepts or rejects the protocol.

mod model;

use crate::abstraction::AbstractionSpec;
use crate::textlang::{self, ast::ModelDocument, ast::QueryDocument, LoadError, Model, ParseError};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

pub use model::{home_commission, home_office};

#[derive(Debug, Error)]
pub enum VoteError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{what} {value} is outside {lo}..={hi}")]
    IndexOutOfRange { what: &'static str, value: i64, lo: i64, hi: i64 },
    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sizes of one model instance, written `NV,NMO,NEC,NC`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Config {
    pub nv: u32,
    pub nmo: u32,
    pub nec: u32,
    pub nc: u32,
}

impl Config {
    pub fn new(nv: u32, nmo: u32, nec: u32, nc: u32) -> Result<Config, VoteError> {
        let c = Config { nv, nmo, nec, nc };
        if [nv, nmo, nec, nc].contains(&0) {
            return Err(VoteError::InvalidConfig(format!("{c}: all counts must be positive")));
        }
        Ok(c)
    }

    /// Every configuration with `NV<=nv`, `NMO<=nmo`, `NEC<=nec`, `NC<=nc`,
    /// smallest first.
    pub fn up_to(nv: u32, nmo: u32, nec: u32, nc: u32) -> Vec<Config> {
        let mut out = Vec::new();
        for a in 1..=nv {
            for b in 1..=nmo {
                for c in 1..=nec {
                    for d in 1..=nc {
                        out.push(Config { nv: a, nmo: b, nec: c, nc: d });
                    }
                }
            }
        }
        out
    }

    fn check(&self, what: &'static str, value: i64, lo: i64, hi: i64) -> Result<(), VoteError> {
        if value < lo || value > hi {
            return Err(VoteError::IndexOutOfRange { what, value, lo, hi });
        }
        Ok(())
    }

    fn voter(&self, i: u32) -> Result<(), VoteError> {
        self.check("voter", i.into(), 1, self.nv.into())
    }

    fn cand(&self, j: u32) -> Result<(), VoteError> {
        self.check("candidate", j.into(), 1, self.nc.into())
    }

    /// Offices are numbered by their (negative) agent id.
    fn office(&self, k: i32) -> Result<(), VoteError> {
        self.check("office", k.into(), -i64::from(self.nmo), -1)
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.nv, self.nmo, self.nec, self.nc)
    }
}

impl FromStr for Config {
    type Err = VoteError;

    fn from_str(s: &str) -> Result<Config, VoteError> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || VoteError::InvalidConfig(format!("'{s}' is not of the form NV,NMO,NEC,NC"));
        if parts.len() != 4 {
            return Err(bad());
        }
        let n: Vec<u32> = parts.iter().map(|p| p.parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
        Config::new(n[0], n[1], n[2], n[3])
    }
}

/// Office `office` stamps a package invalid exactly when its addressee
/// prefers candidate `cand`, and never rejects a protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedStrategy {
    pub cand: u32,
    pub office: i32,
}

/// Deviations enabled in a model. Each flag only adds edges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviationSet {
    pub voter_wrong_recipient: bool,
    /// Ballot and/or return envelope left unsealed.
    pub envelope_unsealed: bool,
    /// No mark, several marks, or a mark against the wrong candidate.
    pub mark_misplaced: bool,
    pub card_unfilled_or_unsigned: bool,
    pub vote_after_certificate: bool,
    pub mo_invalid_stamp: bool,
    pub mo_fixed_strategy: Option<FixedStrategy>,
    /// A voter whose deviation edges are removed.
    pub honest_voter: Option<u32>,
}

impl DeviationSet {
    pub fn honest() -> Self {
        Self::default()
    }

    /// Every voter deviation, offices honest.
    pub fn voters() -> Self {
        DeviationSet {
            voter_wrong_recipient: true,
            envelope_unsealed: true,
            mark_misplaced: true,
            card_unfilled_or_unsigned: true,
            vote_after_certificate: true,
            ..Self::default()
        }
    }

    /// Honest voters; offices may stamp packages invalid.
    pub fn offices() -> Self {
        DeviationSet {
            mo_invalid_stamp: true,
            ..Self::default()
        }
    }

    pub fn all() -> Self {
        DeviationSet {
            mo_invalid_stamp: true,
            ..Self::voters()
        }
    }

    pub fn with_honest_voter(mut self, i: u32) -> Self {
        self.honest_voter = Some(i);
        self
    }

    /// Fix the stamping strategy of `office` against `cand`. The office
    /// needs the invalid-stamp capability for this.
    pub fn with_fixed_strategy(mut self, cand: u32, office: i32) -> Self {
        self.mo_invalid_stamp = true;
        self.mo_fixed_strategy = Some(FixedStrategy { cand, office });
        self
    }

    fn validate(&self, cfg: &Config) -> Result<(), VoteError> {
        if let Some(i) = self.honest_voter {
            cfg.voter(i)?;
        }
        if let Some(f) = self.mo_fixed_strategy {
            cfg.cand(f.cand)?;
            cfg.office(f.office)?;
            if !self.mo_invalid_stamp {
                return Err(VoteError::InvalidConfig("a fixed office strategy needs mo_invalid_stamp".into()));
            }
        }
        Ok(())
    }
}

/// Model text for `cfg` with deviations `dev`.
pub fn model_text(cfg: &Config, dev: &DeviationSet) -> Result<String, VoteError> {
    dev.validate(cfg)?;
    Ok(model::model_text(cfg, dev))
}

pub fn build_model(cfg: &Config, dev: &DeviationSet) -> Result<ModelDocument, VoteError> {
    Ok(textlang::parse_model(&model_text(cfg, dev)?)?)
}

/// Build and elaborate the model.
pub fn load(cfg: &Config, dev: &DeviationSet) -> Result<Model, VoteError> {
    Ok(textlang::load_model(&model_text(cfg, dev)?)?)
}

/// The verified properties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    /// No more ballots received than packages sent.
    Bstuff,
    /// Voter `voter`'s returned vote is tallied as cast. `cand` only
    /// matters to the matching abstraction.
    Valvote { voter: u32, cand: u32 },
    /// No voter registered at `office` and preferring `cand` has their
    /// vote tallied.
    MoblockUnder { office: i32, cand: u32 },
    /// Some run blocks every such vote.
    MoblockOverover { office: i32, cand: u32 },
}

impl Property {
    pub fn name(&self) -> &'static str {
        match self {
            Property::Bstuff => "bstuff",
            Property::Valvote { .. } => "valvote",
            Property::MoblockUnder { .. } => "moblock_under",
            Property::MoblockOverover { .. } => "moblock_overover",
        }
    }

    /// Parse a property name, filling in the indices.
    pub fn parse(name: &str, voter: u32, cand: u32, office: i32) -> Result<Property, VoteError> {
        Ok(match name {
            "bstuff" => Property::Bstuff,
            "valvote" => Property::Valvote { voter, cand },
            "moblock_under" | "moblock" => Property::MoblockUnder { office, cand },
            "moblock_overover" => Property::MoblockOverover { office, cand },
            _ => {
                return Err(VoteError::Unknown {
                    kind: "property",
                    name: name.into(),
                })
            }
        })
    }

    /// The query text with indices substituted.
    pub fn query(&self, cfg: &Config) -> Result<String, VoteError> {
        Ok(match *self {
            Property::Bstuff => "A[] (b_recv<=ep_sent)".to_string(),
            Property::Valvote { voter: i, cand: j } => {
                cfg.voter(i)?;
                cfg.cand(j)?;
                format!(
                    "A[] (Time.end and (Voter({i}).sent_renv or Voter({i}).passed_renv) imply recorded_link[{i}]==Voter({i}).pref_cand)"
                )
            }
            Property::MoblockUnder { office: k, cand: j } | Property::MoblockOverover { office: k, cand: j } => {
                cfg.office(k)?;
                cfg.cand(j)?;
                let q = if matches!(self, Property::MoblockUnder { .. }) { "A[]" } else { "E[]" };
                format!(
                    "{q} forall(i:v_t)(Time.end and vlist[i].mo_addr=={k} and vpref[i]=={j} imply recorded_link[i]!={j})"
                )
            }
        })
    }
}

/// Build the query document for `p` on `cfg`.
pub fn property(p: &Property, cfg: &Config) -> Result<QueryDocument, VoteError> {
    Ok(textlang::parse_query(&p.query(cfg)?)?)
}

/// The abstraction specs used with the corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecName {
    /// Candidate identity and form details dropped, the two counters merged.
    BstuffSpec,
    /// Other candidates collapsed, other voters forget their choices.
    ValvoteSpec { voter: u32, cand: u32 },
    /// Envelope contents reduced to validity flags.
    InvalidMerge,
    /// Bookkeeping dropped for the office-blocking property.
    MoblockSpec,
}

impl SpecName {
    pub fn name(&self) -> &'static str {
        match self {
            SpecName::BstuffSpec => "bstuff_spec",
            SpecName::ValvoteSpec { .. } => "valvote_spec",
            SpecName::InvalidMerge => "invalid_merge",
            SpecName::MoblockSpec => "moblock_spec",
        }
    }

    pub fn parse(name: &str, voter: u32, cand: u32) -> Result<SpecName, VoteError> {
        Ok(match name {
            "bstuff_spec" => SpecName::BstuffSpec,
            "valvote_spec" => SpecName::ValvoteSpec { voter, cand },
            "invalid_merge" => SpecName::InvalidMerge,
            "moblock_spec" => SpecName::MoblockSpec,
            _ => {
                return Err(VoteError::Unknown {
                    kind: "abstraction",
                    name: name.into(),
                })
            }
        })
    }
}

/// The signer of a sealed and signed card, 0 otherwise.
const CARD: &str = "self.sealed && self.dec_signature ? self.dec_pesel : 0";

const BENV_MARK: &str = "(sum (c : c_t) self.cell[c]) == 1 ? (sum (c : c_t) (self.cell[c] == 1 ? c : 0)) : 0";

/// Spec text for `name` on `cfg`.
pub fn abstraction_text(name: &SpecName, cfg: &Config) -> Result<String, VoteError> {
    let nv = cfg.nv;
    Ok(match *name {
        SpecName::BstuffSpec => format!(
            "// Candidate identity.\n\
             remove vpref, recorded_link, Voter.pref_cand;\n\
             remove Benv.cell;\n\
             merge Benv.marks : int[0,{marks}] = sum (c : c_t) self.cell[c];\n\
             // Form and package details.\n\
             remove Renv.sealed, Renv.dec_signature, Renv.dec_pesel;\n\
             merge Renv.card : v_tx = {CARD};\n\
             remove iform.src, iform.dst, iform.addr, iform.inperson;\n\
             remove ElectionPackage.src, ElectionPackage.dst, Renv.src, Renv.stamp;\n\
             remove b_recv, ep_sent;\n\
             merge ballot_diff : int[-{nv},{nv}] = ep_sent - b_recv;\n\
             query A[] (ballot_diff>=0);\n",
            marks = 2 * cfg.nc
        ),
        SpecName::ValvoteSpec { voter: i, cand: j } => {
            cfg.voter(i)?;
            cfg.cand(j)?;
            let mut t = String::new();
            for k in (1..=nv).filter(|k| *k != i) {
                t.push_str(&format!(
                    "// Voter {k}: only whether the choice is {j} survives.\n\
                     remove Voter({k}).pref_cand, vpref[{k}], recorded_link[{k}];\n\
                     merge pref_is_{j}_{k} : bool = Voter({k}).pref_cand == {j};\n\
                     remove ep[{k}].renv;\n\
                     scope Voter({k}).sent_renv, Voter({k}).passed_renv;\n"
                ));
            }
            t.push_str("direction under;\n");
            t
        }
        SpecName::InvalidMerge => format!(
            "remove Benv.sealed, Benv.pkw_stamp, Benv.dec_stamp, Benv.cell;\n\
             merge Benv.invalid : bool = !self.sealed || !self.pkw_stamp || !self.dec_stamp || (sum (c : c_t) self.cell[c]) != 1;\n\
             merge Benv.cell : c_tx = {BENV_MARK};\n\
             remove Renv.src, Renv.stamp, Renv.sealed, Renv.dec_signature, Renv.dec_pesel;\n\
             merge Renv.invalid : bool = !self.sealed || !self.dec_signature || self.dec_pesel == 0;\n\
             remove ElectionPackage.src, ElectionPackage.dst;\n\
             merge ElectionPackage.sent : bool = self.dst != 0;\n"
        ),
        SpecName::MoblockSpec => format!(
            "remove b_recv, ep_sent;\n\
             remove iform.src, iform.dst, iform.addr, iform.inperson;\n\
             remove ElectionPackage.src, ElectionPackage.dst, Renv.src, Renv.stamp;\n\
             remove Renv.sealed, Renv.dec_signature, Renv.dec_pesel;\n\
             merge Renv.card : v_tx = {CARD};\n\
             direction under;\n"
        ),
    })
}

pub fn abstraction_spec(name: &SpecName, cfg: &Config) -> Result<AbstractionSpec, VoteError> {
    Ok(AbstractionSpec::parse(&abstraction_text(name, cfg)?)?)
}

/// Directory name of `cfg` inside a corpus tree.
pub fn corpus_dir(root: &Path, cfg: &Config) -> PathBuf {
    root.join(cfg.to_string())
}

/// Write `model.masg`, `queries.q` and one `.abs` file per spec for each
/// configuration under `root`. Queries use voter 1, candidate 1 and office
/// -1. Returns the directories written.
pub fn write_corpus(root: &Path, cfgs: &[Config], dev: &DeviationSet) -> Result<Vec<PathBuf>, VoteError> {
    let mut out = Vec::new();
    for cfg in cfgs {
        let dir = corpus_dir(root, cfg);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("model.masg"), model_text(cfg, dev)?)?;
        let mut q = String::new();
        for p in standard_properties() {
            q.push_str(&format!("{}: {}\n", p.name(), p.query(cfg)?));
        }
        std::fs::write(dir.join("queries.q"), q)?;
        for s in standard_specs() {
            std::fs::write(dir.join(format!("{}.abs", s.name())), abstraction_text(&s, cfg)?)?;
        }
        out.push(dir);
    }
    Ok(out)
}

fn standard_properties() -> [Property; 4] {
    [
        Property::Bstuff,
        Property::Valvote { voter: 1, cand: 1 },
        Property::MoblockUnder { office: -1, cand: 1 },
        Property::MoblockOverover { office: -1, cand: 1 },
    ]
}

fn standard_specs() -> [SpecName; 4] {
    [
        SpecName::BstuffSpec,
        SpecName::ValvoteSpec { voter: 1, cand: 1 },
        SpecName::InvalidMerge,
        SpecName::MoblockSpec,
    ]
}
