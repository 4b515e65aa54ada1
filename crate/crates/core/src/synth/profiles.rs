use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::capture::Transport;
use crate::labels::{AppKind, TunnelKind};

/// A parametric byte-count distribution. Draws are rounded and clamped to
/// `[0, max]`; a zero draw means "no message".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum SizeDist {
    Constant { value: u64 },
    Uniform { low: u64, high: u64 },
    LogNormal { median: f64, sigma: f64, max: u64 },
}

impl SizeDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            SizeDist::Constant { value } => value,
            SizeDist::Uniform { low, high } => rng.random_range(low..=high),
            SizeDist::LogNormal { median, sigma, max } => {
                let d = LogNormal::new(median.ln(), sigma).expect("validated");
                (d.sample(rng).round() as u64).clamp(1, max)
            }
        }
    }

    fn validate(&self, what: &str) -> Result<(), SynthError> {
        let ok = match *self {
            SizeDist::Constant { .. } => true,
            SizeDist::Uniform { low, high } => low <= high,
            SizeDist::LogNormal { median, sigma, max } => median > 0.0 && sigma >= 0.0 && sigma.is_finite() && max >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(SynthError::InvalidProfile(format!("bad {what} distribution {self:?}")))
        }
    }
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub low: u32,
    pub high: u32,
}

impl CountRange {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.random_range(self.low..=self.high)
    }
}

/// Encapsulation behaviour of one tunnel kind, or of plain traffic when
/// `kind` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunnelProfile {
    pub kind: Option<TunnelKind>,
    pub transport: Transport,
    /// Server port of the outer flow; plain flows use the application port.
    pub server_port: Option<u16>,
    /// Signed IP sizes emitted verbatim after connection setup.
    pub handshake_template: Vec<i64>,
    /// Bytes added to each data packet on top of the application payload,
    /// counting every header up to the outer IP header.
    pub per_packet_overhead: u32,
    /// Padding unit of a trailing partial segment.
    pub record_granularity: u32,
    /// IP sizes of the payload-free packets sent back per acknowledgement,
    /// e.g. an encapsulated inner ACK followed by the outer transport ACK.
    pub ack_sizes: Vec<u32>,
}

impl TunnelProfile {
    /// Smallest legal IP size for this transport.
    pub fn min_packet(&self) -> u32 {
        20 + self.transport.header_len() as u32
    }

    /// Largest payload carried by one packet at `mtu`; full segments fill
    /// the MTU exactly, as a tunnel interface sized to the link would.
    pub fn segment_capacity(&self, mtu: u16) -> u32 {
        (mtu as u32).saturating_sub(self.per_packet_overhead)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let name = self.kind.map_or("plain", |k| k.as_str());
        let bad = |m: String| Err(SynthError::InvalidProfile(format!("{name}: {m}")));
        let min = self.min_packet();
        if self.per_packet_overhead < min {
            return bad(format!("overhead {} below header size {min}", self.per_packet_overhead));
        }
        if self.record_granularity == 0 {
            return bad("record granularity must be positive".into());
        }
        if self.ack_sizes.is_empty() {
            return bad("at least one ack size is needed".into());
        }
        if let Some(a) = self.ack_sizes.iter().find(|&&a| a < min || a > 576) {
            return bad(format!("ack size {a} outside {min}..=576"));
        }
        if let Some(s) = self
            .handshake_template
            .iter()
            .find(|s| s.unsigned_abs() < min as u64 || s.unsigned_abs() > 65535)
        {
            return bad(format!("template size {s} outside {min}..=65535"));
        }
        if self.kind.is_some() && self.handshake_template.is_empty() {
            return bad("tunnel profiles need a handshake template".into());
        }
        if self.kind.is_some() && self.server_port.is_none() {
            return bad("tunnel profiles need a server port".into());
        }
        Ok(())
    }
}

/// Traffic process of one application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppProfile {
    pub kind: AppKind,
    pub server_port: u16,
    /// Signed payload sizes exchanged before the data turns.
    #[serde(default)]
    pub control_exchange: Vec<i64>,
    /// Signed payload sizes exchanged after the data turns.
    #[serde(default)]
    pub closing_exchange: Vec<i64>,
    /// Uniform jitter applied to control and closing messages, in bytes.
    #[serde(default)]
    pub control_jitter: u32,
    pub turns: CountRange,
    pub request_size: SizeDist,
    pub response_size: SizeDist,
    /// Mean client think time between turns, seconds.
    pub think_time_s: f64,
}

impl AppProfile {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidProfile(format!("{}: {m}", self.kind)));
        if self.turns.low > self.turns.high || self.turns.high == 0 {
            return bad("turn range must be non-empty and positive");
        }
        if !(self.think_time_s > 0.0 && self.think_time_s.is_finite()) {
            return bad("think time must be positive");
        }
        if self
            .control_exchange
            .iter()
            .chain(&self.closing_exchange)
            .any(|&s| s == 0 || s.unsigned_abs() <= self.control_jitter as u64)
        {
            return bad("control messages must exceed the jitter in size");
        }
        self.request_size.validate("request")?;
        self.response_size.validate("response")
    }

    pub(crate) fn think_time<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Exp::new(1.0 / self.think_time_s).expect("validated").sample(rng)
    }
}

/// Every profile a corpus is generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub plain: TunnelProfile,
    pub tunnels: Vec<TunnelProfile>,
    pub apps: Vec<AppProfile>,
    /// Application processes of untunneled flows; `apps` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<Vec<AppProfile>>,
}

impl ProfileSet {
    pub const BUILTIN: [&'static str; 2] = ["default", "alt"];

    /// Built-in profile sets. `alt` shares the tunnels and tunneled apps of
    /// `default` but draws untunneled traffic from a different process.
    pub fn builtin(name: &str) -> Result<Self, SynthError> {
        match name {
            "default" => Ok(default_set()),
            "alt" => Ok(ProfileSet {
                background: Some(alt_background()),
                ..default_set()
            }),
            other => Err(SynthError::InvalidProfile(format!(
                "unknown profile set `{other}` (expected one of {})",
                Self::BUILTIN.join(", ")
            ))),
        }
    }

    pub fn tunnel(&self, kind: TunnelKind) -> Result<&TunnelProfile, SynthError> {
        self.tunnels
            .iter()
            .find(|t| t.kind == Some(kind))
            .ok_or_else(|| SynthError::InvalidProfile(format!("no profile for tunnel {kind}")))
    }

    pub fn app(&self, kind: AppKind) -> Result<&AppProfile, SynthError> {
        find_app(&self.apps, kind)
    }

    pub fn background_app(&self, kind: AppKind) -> Result<&AppProfile, SynthError> {
        find_app(self.background.as_deref().unwrap_or(&self.apps), kind)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.plain.kind.is_some() {
            return Err(SynthError::InvalidProfile(
                "plain profile must not name a tunnel kind".into(),
            ));
        }
        self.plain.validate()?;
        let mut kinds = HashSet::new();
        let mut templates = HashSet::new();
        for t in &self.tunnels {
            t.validate()?;
            let Some(k) = t.kind else {
                return Err(SynthError::InvalidProfile("tunnel profile without a kind".into()));
            };
            if !kinds.insert(k) {
                return Err(SynthError::InvalidProfile(format!("duplicate tunnel profile {k}")));
            }
            if !templates.insert(t.handshake_template.clone()) {
                return Err(SynthError::InvalidProfile(format!(
                    "tunnel {k} repeats another template"
                )));
            }
        }
        for set in [Some(&self.apps), self.background.as_ref()].into_iter().flatten() {
            let mut seen = HashSet::new();
            for a in set {
                a.validate()?;
                if !seen.insert(a.kind) {
                    return Err(SynthError::InvalidProfile(format!("duplicate app profile {}", a.kind)));
                }
            }
        }
        Ok(())
    }
}

fn find_app(set: &[AppProfile], kind: AppKind) -> Result<&AppProfile, SynthError> {
    set.iter()
        .find(|a| a.kind == kind)
        .ok_or_else(|| SynthError::InvalidProfile(format!("no profile for app {kind}")))
}

fn tunnel(
    kind: TunnelKind,
    transport: Transport,
    port: u16,
    template: &[i64],
    overhead: u32,
    granularity: u32,
    acks: &[u32],
) -> TunnelProfile {
    TunnelProfile {
        kind: Some(kind),
        transport,
        server_port: Some(port),
        handshake_template: template.to_vec(),
        per_packet_overhead: overhead,
        record_granularity: granularity,
        ack_sizes: acks.to_vec(),
    }
}

fn default_set() -> ProfileSet {
    use Transport::{Tcp, Udp};
    ProfileSet {
        plain: TunnelProfile {
            kind: None,
            transport: Tcp,
            server_port: None,
            handshake_template: Vec::new(),
            per_packet_overhead: 52,
            record_granularity: 1,
            ack_sizes: vec![52],
        },
        tunnels: vec![
            // banner exchange, key exchange, user authentication
            tunnel(
                TunnelKind::Ssh,
                Tcp,
                22,
                &[73, -73, 1084, -1052, 100, -588, 68, 96, -96, 132, -100, 164, -84],
                82,
                16,
                &[52],
            ),
            // reset pair, then TLS-style control records
            tunnel(
                TunnelKind::OpenVpnTcp,
                Tcp,
                1194,
                &[94, -94, 86, 378, -1170, -620, 86, 548, -254, 414, -398],
                119,
                16,
                &[127, 52],
            ),
            tunnel(
                TunnelKind::OpenVpnUdp,
                Udp,
                1194,
                &[82, -82, 74, 366, -1158, -608, 74, 536, -242, 402, -386],
                93,
                16,
                &[101],
            ),
            // IKE_SA_INIT, IKE_AUTH and an informational pair over UDP encapsulation
            tunnel(
                TunnelKind::IpsecEsp,
                Udp,
                4500,
                &[532, -468, 380, -348, 108, -108],
                110,
                16,
                &[116],
            ),
            tunnel(
                TunnelKind::Wireguard,
                Udp,
                51820,
                &[176, -120, 60, -60],
                100,
                16,
                &[108],
            ),
        ],
        apps: default_apps(),
        background: None,
    }
}

fn lognormal(median: f64, sigma: f64, max: u64) -> SizeDist {
    SizeDist::LogNormal { median, sigma, max }
}

const FTP_LOGIN: [i64; 9] = [-42, 16, -34, 16, -23, 8, -20, 6, -48];

fn default_apps() -> Vec<AppProfile> {
    let ftp = |kind: AppKind, command: i64, request: SizeDist, response: SizeDist| AppProfile {
        kind,
        server_port: 21,
        control_exchange: [&FTP_LOGIN[..], &[command, -60]].concat(),
        closing_exchange: vec![-24, 6, -14],
        control_jitter: 4,
        turns: CountRange { low: 1, high: 1 },
        request_size: request,
        response_size: response,
        think_time_s: 0.2,
    };
    vec![
        AppProfile {
            kind: AppKind::Web,
            server_port: 443,
            control_exchange: Vec::new(),
            closing_exchange: Vec::new(),
            control_jitter: 0,
            turns: CountRange { low: 2, high: 10 },
            request_size: lognormal(480.0, 0.35, 1400),
            response_size: lognormal(14_000.0, 1.1, 400_000),
            think_time_s: 0.8,
        },
        AppProfile {
            kind: AppKind::Wget,
            server_port: 80,
            control_exchange: Vec::new(),
            closing_exchange: Vec::new(),
            control_jitter: 0,
            turns: CountRange { low: 1, high: 1 },
            request_size: lognormal(150.0, 0.15, 400),
            response_size: lognormal(250_000.0, 0.9, 2_000_000),
            think_time_s: 0.1,
        },
        ftp(
            AppKind::FtpGet,
            20,
            SizeDist::Constant { value: 0 },
            lognormal(250_000.0, 0.9, 2_000_000),
        ),
        ftp(
            AppKind::FtpPut,
            20,
            lognormal(250_000.0, 0.9, 2_000_000),
            SizeDist::Constant { value: 0 },
        ),
    ]
}

/// Untunneled processes of the `alt` set: chattier browsing, smaller
/// downloads and anonymous FTP.
fn alt_background() -> Vec<AppProfile> {
    let mut apps = default_apps();
    for a in &mut apps {
        match a.kind {
            AppKind::Web => {
                a.turns = CountRange { low: 4, high: 24 };
                a.request_size = lognormal(820.0, 0.5, 1400);
                a.response_size = lognormal(4_000.0, 1.4, 400_000);
                a.think_time_s = 2.5;
            }
            AppKind::Wget => {
                a.request_size = lognormal(260.0, 0.3, 600);
                a.response_size = lognormal(40_000.0, 1.2, 2_000_000);
            }
            AppKind::FtpGet | AppKind::FtpPut => {
                a.control_exchange = vec![-70, 16, -60, 22, -28, 8, -20, 6, -48, 24, -62];
                let big = lognormal(60_000.0, 1.2, 2_000_000);
                if a.kind == AppKind::FtpGet {
                    a.response_size = big;
                } else {
                    a.request_size = big;
                }
                a.think_time_s = 1.0;
            }
        }
    }
    apps
}
