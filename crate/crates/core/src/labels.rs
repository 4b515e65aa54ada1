//! Ground-truth labels carried by flows and feature rows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown {what} label `{value}`")]
pub struct LabelParseError {
    pub what: &'static str,
    pub value: String,
}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident, $what:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = LabelParseError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(LabelParseError { what: $what, value: s.to_string() }),
                }
            }
        }
    };
}

label_enum!(TrafficClass, "traffic class", {
    Untunneled => "untunneled",
    Tunneled => "tunneled",
});

label_enum!(
    /// Tunneling protocols of the reference testbed.
    TunnelKind, "tunnel kind", {
    Ssh => "ssh",
    OpenVpnTcp => "openvpn-tcp",
    OpenVpnUdp => "openvpn-udp",
    IpsecEsp => "ipsec-esp",
    Wireguard => "wireguard",
});

label_enum!(
    /// Applications run inside (or outside) tunnels.
    AppKind, "application", {
    Web => "web",
    Wget => "wget",
    FtpGet => "ftp-get",
    FtpPut => "ftp-put",
});

/// Optional ground truth attached to a flow.
///
/// `app_kind` may also be set on untunneled flows when the generator knows
/// it; the pipeline only consumes it for tunneled rows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowLabels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic_class: Option<TrafficClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tunnel_kind: Option<TunnelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_kind: Option<AppKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mtu: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_tag: Option<String>,
}

impl FlowLabels {
    pub fn untunneled(app: AppKind) -> Self {
        FlowLabels {
            traffic_class: Some(TrafficClass::Untunneled),
            app_kind: Some(app),
            ..Default::default()
        }
    }

    pub fn tunneled(kind: TunnelKind, app: AppKind) -> Self {
        FlowLabels {
            traffic_class: Some(TrafficClass::Tunneled),
            tunnel_kind: Some(kind),
            app_kind: Some(app),
            ..Default::default()
        }
    }

    pub fn with_mtu(mut self, mtu: u16) -> Self {
        self.mtu = Some(mtu);
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.dataset_tag = Some(tag.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        *self == FlowLabels::default()
    }
}
