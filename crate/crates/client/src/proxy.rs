//! Proxy-handler URL construction for routing crawl requests through a
//! specific AS-country pair.

use std::fmt;

use locaudit_core::model::CountryCode;

use crate::ClientError;

/// A proxy credential that never appears in debug output or serialized
/// forms; the only place it is ever written out is the constructed URL.
#[derive(Clone, PartialEq, Eq)]
pub struct Passphrase(String);

impl Passphrase {
    pub fn new(secret: impl Into<String>) -> Self {
        Passphrase(secret.into())
    }

    fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Passphrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Passphrase(***)")
    }
}

/// Per-ASCP proxy configuration.
#[derive(Debug, Clone)]
pub struct ProxyHandle {
    pub token: String,
    pub country: CountryCode,
    pub passphrase: Passphrase,
    pub user_id: String,
    pub port: u16,
}

impl ProxyHandle {
    pub fn new(
        token: impl Into<String>,
        country: CountryCode,
        passphrase: Passphrase,
        user_id: impl Into<String>,
        port: u32,
    ) -> Result<Self, ClientError> {
        if port == 0 || port > 65535 {
            return Err(ClientError::InvalidPort(port));
        }
        Ok(ProxyHandle {
            token: token.into(),
            country,
            passphrase,
            user_id: user_id.into(),
            port: port as u16,
        })
    }
}

/// Exact proxy-handler expression, with the requested country lowercased.
pub fn build_proxy_url(h: &ProxyHandle) -> String {
    format!(
        "http://lum-auth-{}-country-{}:{}@pmgr-customer-{}.zproxy.lum-superproxy.io:{}",
        h.token,
        h.country.as_str().to_ascii_lowercase(),
        h.passphrase.expose(),
        h.user_id,
        h.port
    )
}
