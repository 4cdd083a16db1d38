use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coordination::CoordinationParams;
use crate::token::{self, auth, Bank, HmacKey, NoticeKind, PointId, Token, TokenError, User, UserId};

use super::scenario::{Action, Scenario, ScenarioError, Step};
use super::transcript::{
    first_divergence, ActionRecord, BroadcastRecord, Divergence, Header, Record, TokenOutcome, Transcript,
    TRANSCRIPT_FORMAT,
};

/// A step whose outcome differed from its `expect` field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectationMismatch {
    pub step: usize,
    pub action: String,
    pub expected: String,
    pub verdict: String,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub seed: u64,
    pub transcript: Transcript,
    pub outcomes: Vec<TokenOutcome>,
    pub mismatches: Vec<ExpectationMismatch>,
}

impl Run {
    pub fn verdicts(&self) -> impl Iterator<Item = &str> {
        self.transcript.actions().map(|a| a.verdict.as_str())
    }
}

/// Explicit seed, else the scenario's own, else zero.
pub fn effective_seed(scenario: &Scenario, seed: Option<u64>) -> u64 {
    seed.or(scenario.seed).unwrap_or(0)
}

struct StepResult {
    verdict: String,
    token_id: Option<u64>,
    digest: Option<String>,
    detail: Option<String>,
}

struct StepFailure {
    code: &'static str,
    detail: String,
}

impl From<TokenError> for StepFailure {
    fn from(e: TokenError) -> Self {
        StepFailure {
            code: e.code(),
            detail: e.to_string(),
        }
    }
}

struct Engine<'a> {
    scenario: &'a Scenario,
    params: CoordinationParams,
    rng: ChaCha8Rng,
    bank: Bank,
    users: BTreeMap<String, User>,
    tokens: BTreeMap<String, Token>,
    order: Vec<String>,
    presented: BTreeMap<String, (Vec<String>, Vec<String>)>,
}

fn token_mut<'t>(tokens: &'t mut BTreeMap<String, Token>, name: &str) -> Result<&'t mut Token, StepFailure> {
    tokens.get_mut(name).ok_or_else(|| StepFailure {
        code: "no_token",
        detail: format!("token {name:?} was never acquired"),
    })
}

impl Engine<'_> {
    fn execute(&mut self, step: &Step) -> Result<StepResult, StepFailure> {
        let at = PointId::from(step.action.at());
        let ok = |token_id: Option<u64>, digest: String| StepResult {
            verdict: "ok".into(),
            token_id,
            digest: Some(digest),
            detail: None,
        };
        match &step.action {
            Action::Setup { user, pool_bits, x, .. } => {
                let u = self.users.get_mut(user).expect("validated user");
                let channel = self.scenario.channel;
                let instance = match x {
                    Some(x) => token::setup_user_with(&mut self.bank, u, x, self.params, &channel, &at, &mut self.rng)?,
                    None => {
                        token::setup_user(&mut self.bank, u, *pool_bits, self.params, &channel, &at, &mut self.rng)?
                    }
                };
                let record = self.bank.issuer_record(instance).expect("instance just issued");
                let received = record.received_labels().map(|l| l.len()).unwrap_or(0);
                let digest = auth::digest(&(instance, record.received_labels()));
                Ok(StepResult {
                    detail: Some(format!(
                        "instance {instance}: {received} of {} pulses received",
                        record.params.n() * record.params.m()
                    )),
                    ..ok(None, digest)
                })
            }
            Action::Acquire {
                user,
                token: name,
                set,
                memo,
                ..
            } => {
                let set = self.scenario.presentation_sets[set].clone();
                let u = self.users.get_mut(user).expect("validated user");
                let (t, msg) = token::acquire_token(&mut self.bank, u, set, &at, memo.clone())?;
                let id = t.id.0;
                self.tokens.insert(name.clone(), t);
                self.order.push(name.clone());
                Ok(ok(Some(id), auth::digest(&msg)))
            }
            Action::Decide {
                user, token: name, b, ..
            } => {
                let u = self.users[user].clone();
                let t = token_mut(&mut self.tokens, name)?;
                let msg = token::decide(&mut self.bank, &u, t, b, &at)?;
                Ok(ok(Some(msg.token.0), auth::digest(&msg)))
            }
            Action::DecidePartial {
                user,
                token: name,
                bits,
                ..
            } => {
                let u = self.users[user].clone();
                let t = token_mut(&mut self.tokens, name)?;
                let msg = token::decide_partial(&mut self.bank, &u, t, bits, &at)?;
                Ok(ok(Some(msg.token.0), auth::digest(&msg)))
            }
            Action::Transfer {
                token: name,
                from,
                to,
                memo,
                tamper,
                ..
            } => {
                let sender = self.users[from].clone();
                let mut recipient = self.users.remove(to).expect("validated user");
                let result = (|| {
                    let t = token_mut(&mut self.tokens, name)?;
                    let mut msg = sender.sign_transfer(t, &UserId::from(to.as_str()), &at, memo.clone());
                    if *tamper {
                        if let Some(byte) = msg.signature.0.first_mut() {
                            *byte ^= 1;
                        }
                    }
                    let digest = auth::digest(&msg);
                    let id = t.id.0;
                    token::transfer(&mut self.bank, t, &msg, &mut recipient)?;
                    Ok(ok(Some(id), digest))
                })();
                self.users.insert(to.clone(), recipient);
                result
            }
            Action::Present { user, token: name, .. } => {
                let u = self.users[user].clone();
                let t = token_mut(&mut self.tokens, name)?;
                let msg = token::present(&u, t, &at)?;
                let id = t.id;
                let verdict = self.bank.validate_presentation(id, &at, &msg)?;
                let entry = self.presented.entry(name.clone()).or_default();
                if verdict.is_accept() {
                    entry.0.push(at.to_string());
                } else {
                    entry.1.push(at.to_string());
                }
                Ok(StepResult {
                    verdict: verdict.code(),
                    token_id: Some(id.0),
                    digest: Some(auth::digest(&msg)),
                    detail: (!verdict.is_accept())
                        .then(|| serde_json::to_string(&verdict).expect("verdict serializes")),
                })
            }
        }
    }
}

fn notice_name(kind: &NoticeKind) -> &'static str {
    match kind {
        NoticeKind::Issued { .. } => "issued",
        NoticeKind::Transferred { .. } => "transferred",
        NoticeKind::Mask { .. } => "mask",
        NoticeKind::Spent { .. } => "spent",
    }
}

fn coordinates(scenario: &Scenario, point: &str) -> Vec<f64> {
    scenario
        .layout
        .event(point)
        .map(|e| e.coordinates())
        .unwrap_or_default()
}

/// Digest identifying a scenario independently of its file formatting.
pub fn scenario_digest<T: Serialize>(scenario: &T) -> String {
    auth::digest(scenario)
}

/// Executes the script in order. Precondition failures become rejected
/// records; only an ill-formed scenario is an error.
pub fn run_scenario(scenario: &Scenario, seed: Option<u64>) -> Result<Run, ScenarioError> {
    scenario.validate()?;
    let seed = effective_seed(scenario, seed);
    let mut bank = Bank::new(scenario.layout.clone());
    let mut users = BTreeMap::new();
    for spec in &scenario.users {
        let key = match &spec.key {
            Some(hex) => HmacKey::from_hex(hex).expect("validated key"),
            None => HmacKey::derive(seed, &spec.id),
        };
        let user = User::new(spec.id.as_str(), key);
        bank.register_user(user.id().clone(), user.key().clone());
        users.insert(spec.id.clone(), user);
    }
    let mut engine = Engine {
        scenario,
        params: scenario.params.coordination()?,
        rng: ChaCha8Rng::seed_from_u64(seed),
        bank,
        users,
        tokens: BTreeMap::new(),
        order: Vec::new(),
        presented: BTreeMap::new(),
    };

    let mut transcript = Transcript::new();
    transcript.push(Record::Header(Header {
        format: TRANSCRIPT_FORMAT.into(),
        scenario: scenario.name.clone(),
        scenario_digest: scenario_digest(scenario),
        seed,
    }));
    let mut mismatches = Vec::new();
    let mut seq = 0;
    for (i, step) in scenario.script.iter().enumerate() {
        let before = engine.bank.notices().len();
        let result = engine.execute(step).unwrap_or_else(|f| StepResult {
            verdict: format!("reject:{}", f.code),
            token_id: step.action.token().and_then(|t| engine.tokens.get(t)).map(|t| t.id.0),
            digest: None,
            detail: Some(f.detail),
        });
        if let Some(expect) = &step.expect {
            if !expect.matches(&result.verdict) {
                mismatches.push(ExpectationMismatch {
                    step: i,
                    action: step.action.name().into(),
                    expected: expect.clone().into(),
                    verdict: result.verdict.clone(),
                });
            }
        }
        seq += 1;
        transcript.push(Record::Action(ActionRecord {
            seq,
            step: i,
            action: step.action.name().into(),
            actor: step.action.actor().into(),
            token: step.action.token().map(str::to_string),
            token_id: result.token_id,
            point: step.action.at().into(),
            event: coordinates(scenario, step.action.at()),
            digest: result.digest,
            verdict: result.verdict,
            detail: result.detail,
            expected: step.expect.clone().map(String::from),
        }));

        for notice in &engine.bank.notices()[before..] {
            let mut delivered = Vec::new();
            let mut undelivered = Vec::new();
            let set = engine
                .bank
                .presentation_set(notice.token)
                .expect("notice for a known token");
            for q in set.points() {
                if engine.bank.delivered(notice, q).unwrap_or(false) {
                    delivered.push(q.to_string());
                } else {
                    undelivered.push(q.to_string());
                }
            }
            seq += 1;
            transcript.push(Record::Broadcast(BroadcastRecord {
                seq,
                step: i,
                notice: notice_name(&notice.kind).into(),
                token_id: notice.token.0,
                sent_at: notice.sent_at.to_string(),
                event: coordinates(scenario, notice.sent_at.as_str()),
                digest: auth::digest(notice),
                delivered,
                undelivered,
            }));
        }
    }

    let mut outcomes = Vec::new();
    for name in &engine.order {
        let t = &engine.tokens[name];
        let (accepted_at, rejected_at) = engine.presented.get(name).cloned().unwrap_or_default();
        let outcome = TokenOutcome {
            token: name.clone(),
            token_id: t.id.0,
            owner: t.owner().to_string(),
            accepted_at,
            rejected_at,
        };
        transcript.push(Record::Outcome(outcome.clone()));
        outcomes.push(outcome);
    }
    Ok(Run {
        seed,
        transcript,
        outcomes,
        mismatches,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum VerifyError {
    Scenario(ScenarioError),
    Diverged(Divergence),
}

impl std::fmt::Display for VerifyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VerifyError::Scenario(e) => write!(f, "scenario: {e}"),
            VerifyError::Diverged(d) => write!(f, "transcript diverges from replay at {d}"),
        }
    }
}

impl std::error::Error for VerifyError {}

/// Replays `scenario` and compares the result with `transcript` byte for byte.
pub fn verify_transcript(transcript: &str, scenario: &Scenario, seed: Option<u64>) -> Result<(), VerifyError> {
    let replay = run_scenario(scenario, seed).map_err(VerifyError::Scenario)?;
    match first_divergence(&replay.transcript.to_jsonl(), transcript) {
        None => Ok(()),
        Some(d) => Err(VerifyError::Diverged(d)),
    }
}
