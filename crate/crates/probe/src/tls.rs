use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;

use qers_core::config::{ProbeSpec, VerifyMode};
use rustls::crypto::CryptoProvider;
use rustls::pki_types::{CertificateDer, PrivateKeyDer, PrivatePkcs8KeyDer, ServerName};
use rustls::{ClientConfig, RootCertStore, ServerConfig};

use crate::error::{ProbeError, Result};

fn provider() -> Arc<CryptoProvider> {
    Arc::new(rustls::crypto::ring::default_provider())
}

/// A freshly generated self-signed certificate and its key.
#[derive(Clone)]
pub struct SelfSigned {
    pub cert_pem: String,
    pub key_pem: String,
    cert_der: CertificateDer<'static>,
    key_der: Vec<u8>,
}

impl std::fmt::Debug for SelfSigned {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SelfSigned").finish_non_exhaustive()
    }
}

/// Certificate valid for `localhost` and `127.0.0.1`.
pub fn self_signed() -> Result<SelfSigned> {
    let names = vec!["localhost".to_string(), "127.0.0.1".to_string()];
    let ck = rcgen::generate_simple_self_signed(names)
        .map_err(|e| ProbeError::Setup(format!("certificate generation: {e}")))?;
    Ok(SelfSigned {
        cert_pem: ck.cert.pem(),
        key_pem: ck.key_pair.serialize_pem(),
        cert_der: ck.cert.der().clone(),
        key_der: ck.key_pair.serialize_der(),
    })
}

pub fn server_config(cert: &SelfSigned) -> Result<Arc<ServerConfig>> {
    let key = PrivateKeyDer::Pkcs8(PrivatePkcs8KeyDer::from(cert.key_der.clone()));
    let config = ServerConfig::builder_with_provider(provider())
        .with_safe_default_protocol_versions()
        .and_then(|b| {
            b.with_no_client_auth()
                .with_single_cert(vec![cert.cert_der.clone()], key)
        })
        .map_err(|e| ProbeError::Setup(format!("server TLS config: {e}")))?;
    Ok(Arc::new(config))
}

fn load_roots(spec: &ProbeSpec) -> Result<RootCertStore> {
    let mut roots = RootCertStore::empty();
    match spec.verify {
        VerifyMode::Strict => roots.extend(webpki_roots::TLS_SERVER_ROOTS.iter().cloned()),
        VerifyMode::TrustPinned => {
            let path = spec.ca_file.as_ref().ok_or_else(|| {
                ProbeError::Setup("trust-pinned verification needs a ca_file".into())
            })?;
            let file = File::open(path)
                .map_err(|e| ProbeError::Setup(format!("{}: {e}", path.display())))?;
            for cert in rustls_pemfile::certs(&mut BufReader::new(file)) {
                let cert =
                    cert.map_err(|e| ProbeError::Setup(format!("{}: {e}", path.display())))?;
                roots
                    .add(cert)
                    .map_err(|e| ProbeError::Setup(format!("{}: {e}", path.display())))?;
            }
            if roots.is_empty() {
                return Err(ProbeError::Setup(format!(
                    "{}: no certificates",
                    path.display()
                )));
            }
        }
    }
    Ok(roots)
}

pub fn client_config(spec: &ProbeSpec) -> Result<Arc<ClientConfig>> {
    let config = ClientConfig::builder_with_provider(provider())
        .with_safe_default_protocol_versions()
        .map_err(|e| ProbeError::Setup(format!("client TLS config: {e}")))?
        .with_root_certificates(load_roots(spec)?)
        .with_no_client_auth();
    Ok(Arc::new(config))
}

/// `server_name` if set, else the host part of `target`.
pub fn server_name(spec: &ProbeSpec) -> Result<ServerName<'static>> {
    let host = match &spec.server_name {
        Some(name) => name.clone(),
        None => {
            let (host, _) = spec.target.rsplit_once(':').ok_or_else(|| {
                ProbeError::Setup(format!("target `{}` is not host:port", spec.target))
            })?;
            host.trim_start_matches('[')
                .trim_end_matches(']')
                .to_string()
        }
    };
    ServerName::try_from(host.clone())
        .map_err(|_| ProbeError::Setup(format!("invalid server name `{host}`")))
}
