//! Deterministic synthetic world with planted narrative effects.
//!
//! Every event carries an integer intensity per narrative dimension. The
//! management remarks have a fixed number of filler slots per paragraph and
//! each unit of intensity turns one filler slot in every paragraph into a
//! marker word of that dimension. Targets are linear in the intensities, SUE
//! and one fundamental, plus seeded noise, so a morph that adds one marker per
//! paragraph moves the true target by exactly the planted loading.
//!
//! The marker morpher replaces the first remaining filler slot of a paragraph
//! with the next marker word in the dimension's list. Applied to a synthetic
//! document it therefore yields the same bag of tokens as the document
//! generated with that intensity raised by one.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{doc_id, EditorialStage, SpeakerRole, SpeakerSegment, TranscriptVersion, DEFAULT_WINDOW_SIZE};
use crate::embed::splitmix64;
use crate::features::FundamentalsRow;
use crate::morph::{self, prompts, GenerationParams, TextGenerator};
use crate::targets::{EarningsEvent, ForecastRecord, BPS, HORIZONS};
use crate::NarrativeDimension;

pub const MIN_EVENTS: usize = 50;
/// Scale of SUE: one standard deviation of the planted surprise.
pub const SUE_SCALE: f64 = 0.004;
pub const DISAGREEMENT_BASE_BPS: f64 = 120.0;
pub const DISAGREEMENT_FLOOR_BPS: f64 = 5.0;
pub const FUNDAMENTAL_NAMES: [&str; 8] = [
    "accruals",
    "asset_growth",
    "book_to_market",
    "investment",
    "leverage",
    "momentum",
    "profitability",
    "size",
];
/// The fundamental that enters the planted targets.
pub const DRIVER: &str = "profitability";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_firms: usize,
    pub n_events: usize,
    /// Effect on analysts' expected change, in bps per unit of intensity.
    pub narrative_loadings: BTreeMap<NarrativeDimension, f64>,
    pub realized_loadings: BTreeMap<NarrativeDimension, f64>,
    pub disagreement_loadings: BTreeMap<NarrativeDimension, f64>,
    pub noise_sd_bps: f64,
    /// Effect of a one-standard-deviation surprise on expected change.
    pub sue_effect_bps: f64,
    /// Effect of a one-unit move in the driver fundamental.
    pub fundamentals_effect_bps: f64,
    pub max_intensity: u32,
    pub paragraphs: usize,
    pub start_year: i32,
}

fn loadings(v: [f64; 6]) -> BTreeMap<NarrativeDimension, f64> {
    NarrativeDimension::ALL.into_iter().zip(v).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        // order: guidance, jargon, confidence, global focus, sentiment, uncertainty
        Self {
            seed: 7,
            n_firms: 250,
            n_events: 2000,
            narrative_loadings: loadings([20.0, -20.0, 25.0, 20.0, 30.0, -40.0]),
            realized_loadings: loadings([15.0, -10.0, 20.0, -20.0, 25.0, -45.0]),
            disagreement_loadings: loadings([-5.0, 5.0, -4.0, 3.0, -3.0, 8.0]),
            noise_sd_bps: 20.0,
            sue_effect_bps: 25.0,
            fundamentals_effect_bps: 15.0,
            max_intensity: 8,
            paragraphs: 3,
            start_year: 2012,
        }
    }
}

impl SynthConfig {
    /// Filler slots in every paragraph: room for the maximal intensity of all
    /// six dimensions plus the markers a morph adds.
    pub fn slots_per_paragraph(&self) -> usize {
        6 * self.max_intensity as usize + 2
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_events < MIN_EVENTS {
            return bad(format!("n_events must be at least {MIN_EVENTS}"));
        }
        if self.n_firms == 0 || self.n_firms > self.n_events {
            return bad("n_firms must lie in 1..=n_events".into());
        }
        if !(self.noise_sd_bps >= 0.0 && self.noise_sd_bps.is_finite()) {
            return bad("noise_sd_bps must be finite and non-negative".into());
        }
        if self.max_intensity == 0 || self.paragraphs == 0 {
            return bad("max_intensity and paragraphs must be positive".into());
        }
        let tokens = self.paragraphs * (self.slots_per_paragraph() + MAX_TEMPLATE_TOKENS);
        if tokens > DEFAULT_WINDOW_SIZE {
            return bad(format!(
                "remarks would span {tokens} tokens; keep them within one {DEFAULT_WINDOW_SIZE}-token chunk"
            ));
        }
        let all_finite = [
            &self.narrative_loadings,
            &self.realized_loadings,
            &self.disagreement_loadings,
        ]
        .iter()
        .flat_map(|m| m.values())
        .chain([&self.sue_effect_bps, &self.fundamentals_effect_bps])
        .all(|v| v.is_finite());
        if !all_finite {
            return bad("loadings must be finite".into());
        }
        Ok(())
    }

    fn loading(map: &BTreeMap<NarrativeDimension, f64>, d: NarrativeDimension) -> f64 {
        map.get(&d).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub filler: Vec<String>,
    pub markers: BTreeMap<NarrativeDimension, Vec<String>>,
}

impl Vocabulary {
    pub fn marker_list(&self, d: NarrativeDimension) -> &[String] {
        &self.markers[&d]
    }

    pub fn dimension_of(&self, token: &str) -> Option<NarrativeDimension> {
        self.markers
            .iter()
            .find(|(_, words)| words.iter().any(|w| w == token))
            .map(|(d, _)| *d)
    }

    pub fn is_filler(&self, token: &str) -> bool {
        self.filler.iter().any(|w| w == token)
    }

    /// Filler word used by every slot of paragraph `p`.
    pub fn filler_for(&self, p: usize) -> &str {
        &self.filler[p % self.filler.len()]
    }
}

/// Marker and filler words shipped with the crate.
pub fn vocabulary() -> &'static Vocabulary {
    static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
    VOCAB.get_or_init(|| {
        #[derive(Deserialize)]
        struct Raw {
            filler: Vec<String>,
            markers: BTreeMap<String, Vec<String>>,
        }
        let raw: Raw =
            serde_json::from_str(include_str!("../data/synth_vocab.json")).expect("bundled vocabulary parses");
        let markers = raw
            .markers
            .into_iter()
            .map(|(k, v)| (k.parse().expect("bundled dimension key"), v))
            .collect::<BTreeMap<NarrativeDimension, Vec<String>>>();
        assert_eq!(markers.len(), 6, "one marker list per dimension");
        Vocabulary {
            filler: raw.filler,
            markers,
        }
    })
}

/// Per-event record of every planted quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTruth {
    pub firm_id: String,
    pub event_id: String,
    pub doc_id: String,
    pub call_date: NaiveDate,
    pub intensities: BTreeMap<NarrativeDimension, u32>,
    pub sue_z: f64,
    pub sue: f64,
    pub driver_value: f64,
    /// Standard-normal draws per horizon for (expected, disagreement, realized).
    pub noise: Vec<[f64; 3]>,
    pub expected_change_bps: Vec<f64>,
    pub disagreement_bps: Vec<f64>,
    pub realized_change_bps: Vec<f64>,
}

impl EventTruth {
    /// Closed-form planted targets for horizon index `hi` (0 for one year).
    pub fn planted(&self, cfg: &SynthConfig, hi: usize) -> (f64, f64, f64) {
        let h = (hi + 1) as f64;
        let [ne, nd, nr] = self.noise[hi];
        let text = |m: &BTreeMap<NarrativeDimension, f64>| -> f64 {
            NarrativeDimension::ALL
                .iter()
                .map(|d| SynthConfig::loading(m, *d) * f64::from(self.intensities[d]))
                .sum()
        };
        let ec = 10.0 * h
            + text(&cfg.narrative_loadings)
            + cfg.sue_effect_bps * self.sue_z
            + cfg.fundamentals_effect_bps * self.driver_value
            + cfg.noise_sd_bps * ne;
        let dis = (DISAGREEMENT_BASE_BPS + 10.0 * h + text(&cfg.disagreement_loadings) + 0.5 * cfg.noise_sd_bps * nd)
            .max(DISAGREEMENT_FLOOR_BPS);
        let rc = 5.0 * h
            + text(&cfg.realized_loadings)
            + 0.5 * cfg.sue_effect_bps * self.sue_z
            + cfg.fundamentals_effect_bps * self.driver_value
            + 2.0 * cfg.noise_sd_bps * nr;
        (ec, dis, rc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub sue_scale: f64,
    pub driver: String,
    pub events: Vec<EventTruth>,
}

impl GroundTruth {
    /// True per-unit effect of a morph along `d` on each target.
    pub fn true_pte(&self, d: NarrativeDimension) -> (f64, f64, f64) {
        let c = &self.config;
        (
            SynthConfig::loading(&c.narrative_loadings, d),
            SynthConfig::loading(&c.disagreement_loadings, d),
            SynthConfig::loading(&c.realized_loadings, d),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub transcripts: Vec<TranscriptVersion>,
    pub forecasts: Vec<ForecastRecord>,
    pub events: Vec<EarningsEvent>,
    pub fundamentals: Vec<FundamentalsRow>,
    pub ground_truth: GroundTruth,
}

const MAX_TEMPLATE_TOKENS: usize = 24;
const CALL_MONTHS: [u32; 4] = [2, 5, 8, 11];
const REGIONS: [&str; 5] = ["European", "Asian", "North American", "Latin American", "domestic"];

fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93)) ^ index)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn month_end_before(d: NaiveDate) -> NaiveDate {
    NaiveDate::from_ymd_opt(d.year(), d.month(), 1).expect("valid month") - Duration::days(1)
}

fn template(p: usize, rng: &mut ChaCha8Rng, year: i32) -> [String; 2] {
    let pct = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| format!("{:.1}", rng.random_range(lo..hi));
    match p % 4 {
        0 => [
            "Thank you operator and good morning everyone.".to_string(),
            format!(
                "Revenue for the quarter was ${} million, up {}% from Q{} {}.",
                pct(rng, 100.0, 5000.0),
                pct(rng, 1.0, 40.0),
                rng.random_range(1..=4),
                year - 1
            ),
        ],
        1 => [
            format!("Gross margin came in at {}% while", pct(rng, 20.0, 70.0)),
            format!(
                "operating expenses were ${} million and we repurchased {} million shares in fiscal {}.",
                pct(rng, 10.0, 900.0),
                rng.random_range(1..50),
                year
            ),
        ],
        2 => [
            format!(
                "For the coming year we expect revenue of ${} to ${} billion",
                pct(rng, 1.0, 5.0),
                pct(rng, 5.0, 9.0)
            ),
            format!("with capital spending near {}% of sales.", pct(rng, 2.0, 12.0)),
        ],
        _ => [
            format!("Our {} employees served customers", rng.random_range(500..90000)),
            format!(
                "in {} countries across {} regions.",
                rng.random_range(5..120),
                rng.random_range(2..9)
            ),
        ],
    }
}

/// One paragraph: two template sentences with filler slots after each, the
/// first slots holding the markers.
fn paragraph(
    p: usize,
    sentences: &[String; 2],
    intensities: &BTreeMap<NarrativeDimension, u32>,
    slots: usize,
    vocab: &Vocabulary,
) -> String {
    let mut slot_tokens: Vec<&str> = Vec::with_capacity(slots);
    for d in NarrativeDimension::ALL {
        let list = vocab.marker_list(d);
        for j in 0..intensities[&d] as usize {
            slot_tokens.push(&list[j % list.len()]);
        }
    }
    slot_tokens.resize(slots, vocab.filler_for(p));
    let half = slots / 2;
    format!(
        "{} {} {} {}",
        sentences[0],
        slot_tokens[..half].join(" "),
        sentences[1],
        slot_tokens[half..].join(" ")
    )
}

fn timestamp(d: NaiveDate, hours: i64) -> DateTime<Utc> {
    Utc.from_utc_datetime(&d.and_hms_opt(16, 0, 0).expect("valid time")) + Duration::hours(hours)
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let vocab = vocabulary();
    let slots = cfg.slots_per_paragraph();
    let years = cfg.n_events.div_ceil(cfg.n_firms);

    struct Firm {
        id: String,
        month: u32,
        means: Vec<f64>,
    }
    let firms: Vec<Firm> = (0..cfg.n_firms)
        .map(|f| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1, f as u64));
            Firm {
                id: format!("F{f:04}"),
                month: CALL_MONTHS[rng.random_range(0..CALL_MONTHS.len())],
                means: (0..FUNDAMENTAL_NAMES.len()).map(|_| normal(&mut rng)).collect(),
            }
        })
        .collect();

    let mut fundamentals = Vec::new();
    let fundamentals_row = |firm: &Firm, as_of: NaiveDate, rng: &mut ChaCha8Rng| -> (FundamentalsRow, f64) {
        let mut values = BTreeMap::new();
        let mut driver = 0.0;
        for (k, name) in FUNDAMENTAL_NAMES.iter().enumerate() {
            let v = firm.means[k] * 0.8 + 0.6 * normal(rng);
            let missing = *name != DRIVER && rng.random_bool(0.03);
            if *name == DRIVER {
                driver = v;
            }
            values.insert(name.to_string(), (!missing).then_some(v));
        }
        (
            FundamentalsRow {
                firm_id: firm.id.clone(),
                as_of_date: as_of,
                values,
            },
            driver,
        )
    };

    // a year of history before the first call so one-year changes exist
    for (f, firm) in firms.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2, f as u64));
        let call = NaiveDate::from_ymd_opt(cfg.start_year - 1, firm.month, 15).expect("valid date");
        fundamentals.push(fundamentals_row(firm, month_end_before(call), &mut rng).0);
    }

    let mut transcripts = Vec::new();
    let mut forecasts = Vec::new();
    let mut events = Vec::new();
    let mut truths = Vec::new();

    for idx in 0..cfg.n_events {
        let (y, f) = (idx / cfg.n_firms, idx % cfg.n_firms);
        debug_assert!(y < years);
        let firm = &firms[f];
        let year = cfg.start_year + y as i32;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 3, idx as u64));
        let call_date = NaiveDate::from_ymd_opt(year, firm.month, rng.random_range(1..=28)).expect("valid date");
        let event_id = format!("E{year}{}", firm.month);
        let did = doc_id(&firm.id, &event_id);

        let (frow, driver_value) = fundamentals_row(firm, month_end_before(call_date), &mut rng);
        fundamentals.push(frow);

        let intensities: BTreeMap<NarrativeDimension, u32> = NarrativeDimension::ALL
            .iter()
            .map(|d| (*d, rng.random_range(0..=cfg.max_intensity)))
            .collect();
        let sue_z = normal(&mut rng);
        let noise: Vec<[f64; 3]> = HORIZONS
            .iter()
            .map(|_| [normal(&mut rng), normal(&mut rng), normal(&mut rng)])
            .collect();
        let mut truth = EventTruth {
            firm_id: firm.id.clone(),
            event_id: event_id.clone(),
            doc_id: did,
            call_date,
            intensities,
            sue_z,
            sue: SUE_SCALE * sue_z,
            driver_value,
            noise,
            expected_change_bps: Vec::new(),
            disagreement_bps: Vec::new(),
            realized_change_bps: Vec::new(),
        };
        for hi in 0..HORIZONS.len() {
            let (ec, dis, rc) = truth.planted(cfg, hi);
            truth.expected_change_bps.push(ec);
            truth.disagreement_bps.push(dis);
            truth.realized_change_bps.push(rc);
        }

        // market data
        let price = 40.0 * (0.4 * normal(&mut rng)).exp();
        let eps_prev = price * (0.05 + 0.02 * normal(&mut rng));
        let (fc_factor, real_factor) = match rng.random_range(0..10) {
            0 => (1.0, 2.0),
            1 => (2.0, 1.0),
            _ => (1.0, 1.0),
        };
        let to_raw = |adjusted: f64| adjusted * real_factor / fc_factor;
        let mut realized = BTreeMap::new();
        for (hi, h) in HORIZONS.iter().enumerate() {
            realized.insert(h.to_string(), eps_prev + truth.realized_change_bps[hi] * price / BPS);
        }
        events.push(EarningsEvent {
            firm_id: firm.id.clone(),
            call_date,
            realized_eps_prev: eps_prev,
            price_at_call: price,
            realized_eps_future: realized,
            adjustment_factor_at_realization: real_factor,
            abnormal_return: (!rng.random_bool(0.05)).then(|| 0.03 * normal(&mut rng)),
        });

        // post-call forecasts: a symmetric odd panel reproduces median and std exactly
        let m = rng.random_range(2..=4usize);
        let spread = ((m + 1) as f64 * (2 * m + 1) as f64 / 6.0).sqrt();
        let analyst = |j: usize| format!("A{}-{j:02}", firm.id);
        let broker = |j: usize| format!("B{}", j % 7);
        for (hi, &h) in HORIZONS.iter().enumerate() {
            let center = eps_prev + truth.expected_change_bps[hi] * price / BPS;
            let unit = truth.disagreement_bps[hi] * price / BPS / spread;
            for (j, off) in (-(m as i64)..=m as i64).enumerate() {
                let day = rng.random_range(2..=15);
                forecasts.push(ForecastRecord {
                    analyst_id: analyst(j),
                    broker_id: broker(j),
                    firm_id: firm.id.clone(),
                    issue_date: call_date + Duration::days(day),
                    horizon_years: h,
                    eps_forecast: to_raw(center + off as f64 * unit),
                    adjustment_factor: fc_factor,
                });
                if j == 0 {
                    // superseded by the same analyst's later forecast
                    forecasts.push(ForecastRecord {
                        analyst_id: analyst(j),
                        broker_id: broker(j),
                        firm_id: firm.id.clone(),
                        issue_date: call_date + Duration::days(rng.random_range(0..day)),
                        horizon_years: h,
                        eps_forecast: to_raw(center * 3.0 + 1.0),
                        adjustment_factor: fc_factor,
                    });
                }
            }
            // outside the post-call window
            forecasts.push(ForecastRecord {
                analyst_id: analyst(99),
                broker_id: broker(99),
                firm_id: firm.id.clone(),
                issue_date: call_date + Duration::days(rng.random_range(16..=40)),
                horizon_years: h,
                eps_forecast: to_raw(center - 5.0),
                adjustment_factor: fc_factor,
            });
        }

        // pre-call estimates: median sits at eps_prev - sue * price
        let pre_median = eps_prev - truth.sue * price;
        let pre_unit = 0.002 * price;
        for (j, off) in (-1i64..=1).enumerate() {
            forecasts.push(ForecastRecord {
                analyst_id: analyst(50 + j),
                broker_id: broker(j),
                firm_id: firm.id.clone(),
                issue_date: call_date - Duration::days(rng.random_range(1..=90)),
                horizon_years: 1,
                eps_forecast: to_raw(pre_median + off as f64 * pre_unit),
                adjustment_factor: fc_factor,
            });
        }
        forecasts.push(ForecastRecord {
            analyst_id: analyst(60),
            broker_id: broker(60),
            firm_id: firm.id.clone(),
            issue_date: call_date - Duration::days(rng.random_range(91..=150)),
            horizon_years: 1,
            eps_forecast: to_raw(pre_median + 7.0),
            adjustment_factor: fc_factor,
        });

        // transcript versions
        let paragraphs: Vec<String> = (0..cfg.paragraphs)
            .map(|p| {
                let s = template(p, &mut rng, year);
                paragraph(p, &s, &truth.intensities, slots, vocab)
            })
            .collect();
        let remarks = paragraphs.join("\n\n");
        let draft = remarks
            .replacen("quarter", "quater", 1)
            .replacen("expect", "expect [inaudible]", 1)
            + " [crosstalk]";
        let reply_markers: Vec<&str> = (0..3)
            .map(|_| {
                let d = NarrativeDimension::ALL[rng.random_range(0..6)];
                let list = vocab.marker_list(d);
                list[rng.random_range(0..list.len())].as_str()
            })
            .collect();
        let segments = |text: &str| -> Vec<SpeakerSegment> {
            let seg = |i: u32, role, t: String| SpeakerSegment {
                speaker_role: role,
                order_index: i,
                text: t,
            };
            vec![
                seg(
                    0,
                    SpeakerRole::Operator,
                    format!(
                        "Good day and welcome to the {} fiscal {year} earnings conference call.",
                        firm.id
                    ),
                ),
                seg(1, SpeakerRole::Management, text.to_string()),
                seg(
                    2,
                    SpeakerRole::Analyst,
                    format!(
                        "Thanks. Could you talk about demand trends in the {} market?",
                        REGIONS[idx % REGIONS.len()]
                    ),
                ),
                seg(
                    3,
                    SpeakerRole::Management,
                    format!(
                        "Sure. We see {} conditions and will share more next quarter.",
                        reply_markers.join(" ")
                    ),
                ),
                seg(4, SpeakerRole::Operator, "This concludes today's call.".to_string()),
            ]
        };
        let version = |stage, hours, text: &str| TranscriptVersion {
            event_id: event_id.clone(),
            firm_id: firm.id.clone(),
            call_date,
            editorial_stage: stage,
            version_timestamp: timestamp(call_date, hours),
            segments: segments(text),
            multi_company: false,
        };
        let mut versions = match idx % 4 {
            0 => vec![version(EditorialStage::Audited, 30, &remarks)],
            1 => vec![
                version(EditorialStage::Preliminary, 2, &draft),
                version(EditorialStage::Edited, 20, &remarks),
            ],
            // stage outranks a later timestamp
            2 => vec![
                version(EditorialStage::Proofing, 10, &remarks),
                version(EditorialStage::Preliminary, 50, &draft),
            ],
            _ => vec![
                version(EditorialStage::Audited, 12, &draft),
                version(EditorialStage::Audited, 40, &remarks),
            ],
        };
        versions.shuffle(&mut rng);
        transcripts.extend(versions);
        if idx % 50 == 49 {
            let mut mc = version(EditorialStage::Audited, 60, &draft);
            mc.firm_id = format!("MC{idx:05}");
            mc.event_id = format!("JOINT{year}");
            mc.multi_company = true;
            transcripts.push(mc);
        }
        truths.push(truth);
    }

    Ok(SynthCorpus {
        transcripts,
        forecasts,
        events,
        fundamentals,
        ground_truth: GroundTruth {
            config: cfg.clone(),
            sue_scale: SUE_SCALE,
            driver: DRIVER.to_string(),
            events: truths,
        },
    })
}

/// Offline morpher: in every paragraph, swaps the first filler slot for the
/// next marker word of the dimension (or appends one when no filler is left).
/// Digit-bearing tokens are never touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkerMorpher {
    dimension: Option<NarrativeDimension>,
}

impl MarkerMorpher {
    /// Reads the dimension from the system prompt of each request.
    pub fn from_prompt() -> Self {
        Self { dimension: None }
    }

    pub fn morph_paragraph(d: NarrativeDimension, paragraph: &str) -> String {
        let vocab = vocabulary();
        let list = vocab.marker_list(d);
        let mut tokens: Vec<&str> = paragraph.split_whitespace().collect();
        let k = tokens.iter().filter(|t| list.iter().any(|w| w == *t)).count();
        let marker = list[k % list.len()].as_str();
        match tokens.iter().position(|t| vocab.is_filler(t)) {
            Some(i) => tokens[i] = marker,
            None => tokens.push(marker),
        }
        tokens.join(" ")
    }
}

pub fn stub_generator_for(dim: NarrativeDimension) -> MarkerMorpher {
    MarkerMorpher { dimension: Some(dim) }
}

fn dimension_from_prompt(system: &str) -> Option<NarrativeDimension> {
    NarrativeDimension::ALL
        .into_iter()
        .find(|d| prompts::morph_prompt(*d) == system)
}

impl TextGenerator for MarkerMorpher {
    fn generate(&self, system: &str, user_text: &str, _: &GenerationParams) -> Result<String, String> {
        let d = match self.dimension {
            Some(d) => d,
            None => dimension_from_prompt(system).ok_or("unrecognized morphing prompt")?,
        };
        Ok(Self::morph_paragraph(d, user_text))
    }
}

/// Offline judge: approves a morph when the text changed and every
/// digit-bearing token survived.
#[derive(Debug, Clone, Copy, Default)]
pub struct MarkerJudge;

impl TextGenerator for MarkerJudge {
    fn generate(&self, _: &str, prompt: &str, _: &GenerationParams) -> Result<String, String> {
        let (a, b) = prompts::parse_judge_prompt(prompt).ok_or("not a judge prompt")?;
        let ok = a != b && morph::numeral_preservation_check(a, b);
        Ok(if ok {
            "1. Yes: the morphing was executed correctly".to_string()
        } else {
            "3. No: the morphing is inadequate".to_string()
        })
    }
}

/// Offline factor rater: one rating point per `markers_per_point` markers of
/// the requested dimension, starting from 1.
#[derive(Debug, Clone, Copy)]
pub struct MarkerRater {
    pub markers_per_point: f64,
}

impl MarkerRater {
    pub fn for_config(cfg: &SynthConfig) -> Self {
        Self {
            markers_per_point: (cfg.paragraphs as f64 * f64::from(cfg.max_intensity) / 9.0).max(1e-9),
        }
    }
}

impl TextGenerator for MarkerRater {
    fn generate(&self, _: &str, prompt: &str, _: &GenerationParams) -> Result<String, String> {
        let d = NarrativeDimension::ALL
            .into_iter()
            .find(|d| prompt.contains(&format!("presence of {} in", d.label().to_lowercase())))
            .ok_or("not a rating prompt")?;
        let excerpt = prompt.split("Excerpt: ").nth(1).unwrap_or("");
        let list = vocabulary().marker_list(d);
        let count = excerpt
            .split_whitespace()
            .filter(|t| list.iter().any(|w| w == *t))
            .count();
        let rating = (1.0 + (count as f64 / self.markers_per_point).round()).min(10.0);
        Ok(format!("{rating}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_masked_document, ingest, MaskConfig};
    use crate::embed::{embed_document, hashing_embedder, EmbeddingProvider};
    use crate::morph::{split_paragraphs, validate_and_retry, Verdict};
    use crate::targets::build_target_rows;

    fn small() -> SynthConfig {
        SynthConfig {
            n_firms: 20,
            n_events: 60,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig::default().validate().is_ok());
        let c = SynthConfig {
            n_events: 10,
            ..Default::default()
        };
        assert!(generate_corpus(&c).is_err());
        let c = SynthConfig {
            max_intensity: 40,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn deterministic() {
        let a = generate_corpus(&small()).unwrap();
        let b = generate_corpus(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(&SynthConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.ground_truth, c.ground_truth);
    }

    #[test]
    fn planted_targets_match_pipeline() {
        let cfg = small();
        let c = generate_corpus(&cfg).unwrap();
        let rows = build_target_rows(&c.events, &c.forecasts).unwrap();
        assert_eq!(rows.len(), 3 * cfg.n_events);
        for t in &c.ground_truth.events {
            for (hi, h) in HORIZONS.iter().enumerate() {
                let (ec, dis, rc) = t.planted(&cfg, hi);
                assert_eq!(ec, t.expected_change_bps[hi]);
                let r = rows
                    .iter()
                    .find(|r| r.firm_id == t.firm_id && r.call_date == t.call_date && r.horizon_years == *h)
                    .unwrap();
                assert!((r.expected_change_bps.unwrap() - ec).abs() < 1e-9);
                assert!((r.disagreement_bps.unwrap() - dis).abs() < 1e-9);
                assert!((r.realized_change_bps.unwrap() - rc).abs() < 1e-9);
                assert!((r.sue.unwrap() - t.sue).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ingest_recovers_final_remarks() {
        let c = generate_corpus(&small()).unwrap();
        let (kept, dropped) = ingest(c.transcripts.clone());
        assert!(dropped.is_empty());
        assert_eq!(kept.len(), c.ground_truth.events.len());
        for r in &kept {
            assert!(!r.text.contains("[crosstalk]"), "draft selected for {}", r.doc_id);
            let t = c.ground_truth.events.iter().find(|t| t.doc_id == r.doc_id).unwrap();
            let v = vocabulary();
            for d in NarrativeDimension::ALL {
                let n = r
                    .text
                    .split_whitespace()
                    .filter(|w| v.dimension_of(w) == Some(d))
                    .count();
                assert_eq!(n as u32, t.intensities[&d] * small().paragraphs as u32);
            }
        }
    }

    #[allow(clippy::needless_range_loop)]
    #[test]
    fn morph_equals_raised_intensity() {
        let cfg = small();
        let c = generate_corpus(&cfg).unwrap();
        let (kept, _) = ingest(c.transcripts.clone());
        let r = &kept[0];
        let morpher = stub_generator_for(NarrativeDimension::Sentiment);
        let out = morph::morph_document(
            &split_paragraphs(&r.text),
            NarrativeDimension::Sentiment,
            &morpher,
            &GenerationParams::default(),
        )
        .unwrap();
        assert_eq!(split_paragraphs(&out).len(), cfg.paragraphs);
        assert!(morph::numeral_preservation_check(&r.text, &out));

        // embedding shift is the token-mean delta of one filler -> marker swap per paragraph
        let e = hashing_embedder(3, 16);
        let mc = MaskConfig::default();
        let before = build_masked_document("a", "f", r.call_date, &r.text, &mc).unwrap();
        let after = build_masked_document("a", "f", r.call_date, &out, &mc).unwrap();
        let n = before.chunks[0].token_count as f64;
        assert_eq!(after.chunks[0].token_count as f64, n);
        let eb = embed_document(&before, &e).unwrap();
        let ea = embed_document(&after, &e).unwrap();
        let k = c
            .ground_truth
            .events
            .iter()
            .find(|t| t.doc_id == r.doc_id)
            .unwrap()
            .intensities[&NarrativeDimension::Sentiment] as usize;
        let v = vocabulary();
        let list = v.marker_list(NarrativeDimension::Sentiment);
        let marker = e.token_vector(&list[k % list.len()]);
        for j in 0..16 {
            let mut delta = 0.0;
            for p in 0..cfg.paragraphs {
                delta += (marker[j] - e.token_vector(v.filler_for(p))[j]) / n;
            }
            let got = f64::from(ea.values[j]) - f64::from(eb.values[j]);
            assert!((got - delta).abs() < 1e-6, "coordinate {j}");
        }
        assert_eq!(e.dim(), 16);
    }

    #[test]
    fn stub_validation_accepts_and_rater_tracks_markers() {
        let c = generate_corpus(&small()).unwrap();
        let (kept, _) = ingest(c.transcripts);
        let r = validate_and_retry(
            &kept[0].doc_id,
            &kept[0].text,
            NarrativeDimension::Uncertainty,
            &MarkerMorpher::from_prompt(),
            &MarkerJudge,
            &GenerationParams::default(),
            3,
        )
        .unwrap();
        assert!(r.accepted);
        assert_eq!((r.attempts, r.judge_verdict), (1, Verdict::Yes));

        let rater = MarkerRater::for_config(&small());
        let p = crate::pte::rating_prompt(NarrativeDimension::Guidance, "outlook roadmap also");
        assert_eq!(rater.generate("", &p, &GenerationParams::default()).unwrap(), "2");
    }
}
