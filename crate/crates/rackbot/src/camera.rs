//! Per-view capture: rendering, sensor noise, JPEG encoding and the
//! still-image cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use bytes::Bytes;
use jpeg_encoder::{ColorType, Encoder};
use rackbot_core::workcell::{render, FloorMode, View, WorkcellConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cell::{CellSim, Scene, SceneKey};
use crate::clock;

#[derive(Clone, Debug)]
pub struct Captured {
    pub view: View,
    pub seq: u64,
    pub ts_ms: u64,
    pub jpeg: Bytes,
}

#[derive(Debug, thiserror::Error)]
pub enum CaptureError {
    #[error("jpeg encoding failed: {0}")]
    Encode(String),
    #[error("render task failed: {0}")]
    Join(String),
}

type PatternCache = Mutex<HashMap<(View, u8), Arc<Vec<i8>>>>;

/// Fixed-pattern noise shared by every camera of the same view and amplitude.
fn noise_pattern(view: View, amplitude: u8) -> Arc<Vec<i8>> {
    static PATTERNS: OnceLock<PatternCache> = OnceLock::new();
    let mut map = PATTERNS.get_or_init(Default::default).lock().unwrap();
    map.entry((view, amplitude))
        .or_insert_with(|| {
            let (w, h) = view.resolution();
            let mut rng = ChaCha8Rng::seed_from_u64(0x5e45_0000 + amplitude as u64 + 256 * view as u64);
            let a = amplitude.min(127) as i8;
            Arc::new((0..w as usize * h as usize * 3).map(|_| rng.random_range(-a..=a)).collect())
        })
        .clone()
}

pub fn encode_jpeg(pixels: &[u8], width: u32, height: u32, quality: u8) -> Result<Vec<u8>, CaptureError> {
    let mut out = Vec::with_capacity(pixels.len() / 8);
    Encoder::new(&mut out, quality)
        .encode(pixels, width as u16, height as u16, ColorType::Rgb)
        .map_err(|e| CaptureError::Encode(e.to_string()))?;
    Ok(out)
}

/// Renders and encodes one scene exactly as the camera would publish it.
pub fn render_jpeg(
    view: View,
    scene: &Scene,
    workcell: &WorkcellConfig,
    quality: u8,
    noise: Option<&[i8]>,
) -> Result<Vec<u8>, CaptureError> {
    let mut frame = render(view, &scene.pose, scene.rope.as_deref(), workcell);
    if let Some(noise) = noise {
        for (p, n) in frame.pixels.iter_mut().zip(noise) {
            *p = (*p as i16 + *n as i16).clamp(0, 255) as u8;
        }
    }
    encode_jpeg(&frame.pixels, frame.width, frame.height, quality)
}

struct State {
    seq: u64,
    last_ts: u64,
    still: Option<Captured>,
    encoded: Option<(SceneKey, Bytes)>,
}

pub struct Camera {
    view: View,
    workcell: Arc<WorkcellConfig>,
    quality: u8,
    noise: Option<Arc<Vec<i8>>>,
    cache_ms: f64,
    state: tokio::sync::Mutex<State>,
}

impl Camera {
    pub fn new(view: View, workcell: Arc<WorkcellConfig>, quality: u8, noise_amplitude: u8, cache_ms: f64) -> Self {
        let uniform = view == View::Bottom && workcell.floor_mode == FloorMode::OpaqueInlay;
        let noise = (noise_amplitude > 0 && !uniform).then(|| noise_pattern(view, noise_amplitude));
        Self {
            view,
            workcell,
            quality,
            noise,
            cache_ms,
            state: tokio::sync::Mutex::new(State {
                seq: 0,
                last_ts: 0,
                still: None,
                encoded: None,
            }),
        }
    }

    pub fn view(&self) -> View {
        self.view
    }

    async fn encode(&self, scene: Scene) -> Result<Bytes, CaptureError> {
        let view = self.view;
        let workcell = self.workcell.clone();
        let quality = self.quality;
        let noise = self.noise.clone();
        tokio::task::spawn_blocking(move || {
            render_jpeg(view, &scene, &workcell, quality, noise.as_deref().map(Vec::as_slice)).map(Bytes::from)
        })
        .await
        .map_err(|e| CaptureError::Join(e.to_string()))?
    }

    /// Encodes the current scene without publishing a frame.
    pub async fn warm(&self, sim: &Mutex<CellSim>) -> Result<(), CaptureError> {
        let mut st = self.state.lock().await;
        let scene = sim.lock().unwrap().scene_at(clock::now_ms_f64());
        let key = scene.key;
        let jpeg = self.encode(scene).await?;
        st.encoded = Some((key, jpeg));
        Ok(())
    }

    /// A still image: the cached frame if it is younger than the cache
    /// window, else a fresh capture at arrival time.
    pub async fn still(&self, sim: &Mutex<CellSim>) -> Result<Captured, CaptureError> {
        let mut st = self.state.lock().await;
        let now = clock::now_ms_f64();
        if let Some(c) = &st.still {
            if now - (c.ts_ms as f64) < self.cache_ms {
                return Ok(c.clone());
            }
        }
        let captured = self.capture_locked(&mut st, sim, now as u64, true).await?;
        st.still = Some(captured.clone());
        Ok(captured)
    }

    /// A frame exposed exactly at `at_ms`, bypassing the still cache. Stream
    /// ticks use this; their timestamps stay on the stream's own grid.
    pub async fn capture_at(&self, sim: &Mutex<CellSim>, at_ms: u64) -> Result<Captured, CaptureError> {
        let mut st = self.state.lock().await;
        self.capture_locked(&mut st, sim, at_ms, false).await
    }

    async fn capture_locked(
        &self,
        st: &mut State,
        sim: &Mutex<CellSim>,
        at_ms: u64,
        clamp: bool,
    ) -> Result<Captured, CaptureError> {
        let ts = if clamp { at_ms.max(st.last_ts) } else { at_ms };
        let scene = sim.lock().unwrap().scene_at(ts as f64);
        let jpeg = match &st.encoded {
            Some((key, bytes)) if *key == scene.key => bytes.clone(),
            _ => {
                let key = scene.key;
                let bytes = self.encode(scene).await?;
                st.encoded = Some((key, bytes.clone()));
                bytes
            }
        };
        st.seq += 1;
        st.last_ts = st.last_ts.max(ts);
        Ok(Captured {
            view: self.view,
            seq: st.seq,
            ts_ms: ts,
            jpeg,
        })
    }
}
