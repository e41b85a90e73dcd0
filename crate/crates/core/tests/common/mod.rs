#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

pub type Handler = dyn Fn(usize, &str, &str) -> (u16, String) + Send + Sync;

#[derive(Debug, Clone)]
pub struct Seen {
    pub path: String,
    pub body: String,
    pub authorization: Option<String>,
}

/// Minimal HTTP/1.1 server: one request per connection, answered by `handler`
/// with the zero-based request index, path and body.
pub struct MockServer {
    pub url: String,
    hits: Arc<AtomicUsize>,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl MockServer {
    pub fn start(handler: impl Fn(usize, &str, &str) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let seen = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let (h, s) = (hits.clone(), seen.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (h, s, handler) = (h.clone(), s.clone(), handler.clone());
                thread::spawn(move || serve(stream, &h, &s, &*handler));
            }
        });
        MockServer { url, hits, seen }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn seen(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, hits: &AtomicUsize, seen: &Mutex<Vec<Seen>>, handler: &Handler) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut length = 0usize;
    let mut authorization = None;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).unwrap();
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            match name.trim().to_ascii_lowercase().as_str() {
                "content-length" => length = value.trim().parse().unwrap(),
                "authorization" => authorization = Some(value.trim().to_string()),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body).unwrap();
    let body = String::from_utf8(body).unwrap();
    let index = hits.fetch_add(1, Ordering::SeqCst);
    seen.lock().unwrap().push(Seen {
        path: path.clone(),
        body: body.clone(),
        authorization,
    });
    let (status, reply) = handler(index, &path, &body);
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    );
    let _ = stream.flush();
}

use paravid::gateway::{
    Candidate, ConceptEncoding, Gateway, ImageArtifact, ImageEncoding, Provider, ProviderConfig,
    TextEncoding,
};
use paravid::verification::{AlignmentCount, QaPair};

pub type TextFn = Box<dyn Fn(&str) -> Vec<f32> + Send + Sync>;
pub type ImageFn = Box<dyn Fn(&ImageArtifact) -> Vec<f32> + Send + Sync>;
pub type ParaphraseFn = Box<dyn Fn(&str, usize) -> Vec<String> + Send + Sync>;

/// Stub provider with individually replaceable behaviours.
pub struct Planted {
    pub inner: Gateway,
    pub dim: usize,
    pub t2t: Option<ParaphraseFn>,
    pub qa: Option<Vec<QaPair>>,
    pub text_embed: Option<TextFn>,
    pub image_embed: Option<ImageFn>,
    pub concept_embed: Option<(usize, TextFn)>,
    /// Topics whose text contains this fail at t2t.
    pub fail_t2t_if: Option<String>,
    pub fail_image_verify: bool,
}

impl Planted {
    pub fn new(config: ProviderConfig) -> Self {
        Planted {
            dim: config.stub_dim,
            inner: Gateway::new(config).unwrap(),
            t2t: None,
            qa: None,
            text_embed: None,
            image_embed: None,
            concept_embed: None,
            fail_t2t_if: None,
            fail_image_verify: false,
        }
    }
}

impl Provider for Planted {
    fn t2t(&self, query: &str, n: usize) -> paravid::Result<Vec<String>> {
        if let Some(bad) = &self.fail_t2t_if {
            if query.contains(bad.as_str()) {
                return Err(paravid::Error::InvalidArgument(format!("planted failure for {query:?}")));
            }
        }
        match &self.t2t {
            Some(f) => Ok(f(query, n)),
            None => self.inner.t2t(query, n),
        }
    }

    fn t2i(&self, query: &str, seed: u64, n_images: usize) -> paravid::Result<Vec<ImageArtifact>> {
        self.inner.t2i(query, seed, n_images)
    }

    fn i2t(&self, image: &ImageArtifact, n: usize) -> paravid::Result<Vec<String>> {
        self.inner.i2t(image, n)
    }

    fn qa_generate(&self, query: &str) -> paravid::Result<Vec<QaPair>> {
        match &self.qa {
            Some(qa) => Ok(qa.clone()),
            None => self.inner.qa_generate(query),
        }
    }

    fn qa_verify(&self, candidate: Candidate<'_>, pairs: &[QaPair]) -> paravid::Result<AlignmentCount> {
        if self.fail_image_verify && matches!(candidate, Candidate::Image(_)) {
            return Err(paravid::Error::InvalidArgument("planted image verification failure".into()));
        }
        self.inner.qa_verify(candidate, pairs)
    }

    fn encode_text(&self, texts: &[String]) -> paravid::Result<TextEncoding> {
        let mut enc = self.inner.encode_text(texts)?;
        if let Some(f) = &self.text_embed {
            enc.embeddings = texts.iter().map(|t| f(t)).collect();
            enc.dim = self.dim;
        }
        if let Some((dim, f)) = &self.concept_embed {
            enc.concepts = Some(ConceptEncoding {
                dim: *dim,
                vectors: texts.iter().map(|t| f(t)).collect(),
            });
        }
        Ok(enc)
    }

    fn encode_image(&self, images: &[ImageArtifact]) -> paravid::Result<ImageEncoding> {
        let mut enc = self.inner.encode_image(images)?;
        if let Some(f) = &self.image_embed {
            enc.embeddings = images.iter().map(f).collect();
            enc.dim = self.dim;
        }
        Ok(enc)
    }
}

/// Small stub configuration with a per-test cache directory.
pub fn stub_config(cache: &std::path::Path, dim: usize) -> ProviderConfig {
    ProviderConfig {
        cache_dir: cache.to_path_buf(),
        stub_dim: dim,
        ..ProviderConfig::default()
    }
}
