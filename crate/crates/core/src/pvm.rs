//! Persistence-of-Vision Memory: a ring of the last `B` partial observations
//! composed into a single agent-facing observation.
//!
//! Two compositions are provided. *Stitching* paints each record into a
//! full-frame canvas at its native scale and location, newest on top, like a
//! jigsaw; pixels no record covers are zero (or the upsampled periphery when
//! one is supplied). *Stacking* channel-stacks the raw observations, oldest
//! first, zero-padded while history is short.

use std::collections::VecDeque;

use thiserror::Error;

use crate::envkit::ObservationPacket;
use crate::image::Image;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PvmError {
    #[error("record at ({x}, {y}) with size {h}x{w} leaves the {fh}x{fw} frame")]
    OutOfBounds { x: usize, y: usize, h: usize, w: usize, fh: usize, fw: usize },
    #[error("stacked observations must share one resolution: got {got_h}x{got_w}, buffer holds {have_h}x{have_w}")]
    ResolutionMismatch { got_h: usize, got_w: usize, have_h: usize, have_w: usize },
}

/// Memory composition selected in the run config.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PvmKind {
    Stitch,
    Stack,
    /// No memory: the agent sees only the current observation (equivalent to
    /// a stitch window of one).
    Off,
}

/// Memory block of the run configuration: the composition kind and the
/// window size `B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PvmConfig {
    pub kind: PvmKind,
    pub window: usize,
}

impl Default for PvmConfig {
    fn default() -> Self {
        PvmConfig { kind: PvmKind::Stitch, window: 3 }
    }
}

impl PvmConfig {
    /// Observation planes the memory emits per step (before frame stacking).
    pub fn planes_per_step(&self) -> usize {
        match self.kind {
            PvmKind::Stitch | PvmKind::Off => 1,
            PvmKind::Stack => self.window,
        }
    }
}

struct Record {
    obs: Image,
    loc: (usize, usize),
}

/// Ring buffer of the last `B` (observation, location) records, newest last.
/// Cleared on episode reset.
pub struct PvmBuffer {
    cap: usize,
    frame_h: usize,
    frame_w: usize,
    records: VecDeque<Record>,
}

impl PvmBuffer {
    pub fn new(cap: usize, frame_h: usize, frame_w: usize) -> PvmBuffer {
        assert!(cap >= 1, "PVM capacity must be at least 1");
        PvmBuffer { cap, frame_h, frame_w, records: VecDeque::with_capacity(cap) }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    /// Drops all records; the next canvas is all-zero until the next push.
    pub fn reset(&mut self) {
        self.records.clear();
    }

    fn advance(&mut self, obs: Image, loc: (usize, usize)) {
        if self.records.len() == self.cap {
            self.records.pop_front();
        }
        self.records.push_back(Record { obs, loc });
    }

    /// Pushes a native-scale observation and rebuilds the stitched canvas:
    /// records are painted oldest to newest, so overlaps take the newest
    /// record's pixels; untouched pixels are zero.
    pub fn push_stitch(&mut self, obs: Image, loc: (usize, usize)) -> Result<Image, PvmError> {
        if loc.0 + obs.h() > self.frame_h || loc.1 + obs.w() > self.frame_w {
            return Err(PvmError::OutOfBounds {
                x: loc.0,
                y: loc.1,
                h: obs.h(),
                w: obs.w(),
                fh: self.frame_h,
                fw: self.frame_w,
            });
        }
        self.advance(obs, loc);
        Ok(self.canvas(None))
    }

    /// Rebuilds the canvas from the current window. `underlay`, when given,
    /// is painted first at full frame resolution (used for the upsampled
    /// peripheral observation) and then overwritten by the foveal records.
    pub fn canvas(&self, underlay: Option<&Image>) -> Image {
        let mut canvas = match underlay {
            Some(base) => {
                debug_assert_eq!((base.h(), base.w()), (self.frame_h, self.frame_w));
                base.clone()
            }
            None => Image::zeros(self.frame_h, self.frame_w),
        };
        for rec in &self.records {
            canvas.paint(rec.loc.0, rec.loc.1, &rec.obs);
        }
        canvas
    }

    /// Pushes an observation and returns the channel stack of the last `B`
    /// observations, oldest first, zero-padded while the buffer is filling.
    pub fn push_stack(&mut self, obs: Image) -> Result<Vec<Image>, PvmError> {
        if let Some(rec) = self.records.back() {
            if (rec.obs.h(), rec.obs.w()) != (obs.h(), obs.w()) {
                return Err(PvmError::ResolutionMismatch {
                    got_h: obs.h(),
                    got_w: obs.w(),
                    have_h: rec.obs.h(),
                    have_w: rec.obs.w(),
                });
            }
        }
        let (h, w) = (obs.h(), obs.w());
        self.advance(obs, (0, 0));
        let pad = self.cap - self.records.len();
        let mut stack = Vec::with_capacity(self.cap);
        for _ in 0..pad {
            stack.push(Image::zeros(h, w));
        }
        for rec in &self.records {
            stack.push(rec.obs.clone());
        }
        Ok(stack)
    }
}

/// Observation pipeline: persistence-of-vision memory followed by frame
/// stacking and a resize to the network input resolution.
///
/// Per step it ingests one [`ObservationPacket`] and emits the planes the
/// agent network consumes. With stitching the memory contributes one
/// full-frame canvas per step; with stacking it contributes `B` planes at the
/// foveal resolution. The last `frame_stack` of those outputs, oldest first,
/// form the network input.
pub struct ObsPipeline {
    kind: PvmKind,
    pvm: PvmBuffer,
    frame_stack: usize,
    input_hw: usize,
    history: VecDeque<Vec<Image>>,
}

impl ObsPipeline {
    pub fn new(
        kind: PvmKind,
        window: usize,
        frame_hw: usize,
        frame_stack: usize,
        input_hw: usize,
    ) -> ObsPipeline {
        let cap = match kind {
            PvmKind::Off => 1,
            _ => window,
        };
        ObsPipeline {
            kind,
            pvm: PvmBuffer::new(cap, frame_hw, frame_hw),
            frame_stack,
            input_hw,
            history: VecDeque::with_capacity(frame_stack),
        }
    }

    /// Planes per step contributed by the memory.
    pub fn planes_per_step(&self) -> usize {
        match self.kind {
            PvmKind::Stitch | PvmKind::Off => 1,
            PvmKind::Stack => self.pvm.capacity(),
        }
    }

    /// Total channels of the network input.
    pub fn channels(&self) -> usize {
        self.frame_stack * self.planes_per_step()
    }

    pub fn input_hw(&self) -> usize {
        self.input_hw
    }

    pub fn reset(&mut self) {
        self.pvm.reset();
        self.history.clear();
    }

    /// Ingests one packet and returns this step's memory output, resized to
    /// the input resolution.
    pub fn push(&mut self, packet: &ObservationPacket) -> Result<Vec<Image>, PvmError> {
        let planes = match self.kind {
            PvmKind::Stitch | PvmKind::Off => {
                self.pvm.push_stitch(packet.foveal.clone(), packet.fovea_location)?;
                let underlay = if packet.peripheral.as_slice().iter().any(|&v| v != 0.0) {
                    Some(
                        packet
                            .peripheral
                            .resize_bilinear(self.pvm.frame_h, self.pvm.frame_w),
                    )
                } else {
                    None
                };
                vec![self.pvm.canvas(underlay.as_ref())]
            }
            PvmKind::Stack => self.pvm.push_stack(packet.foveal.clone())?,
        };
        let resized: Vec<Image> = planes
            .iter()
            .map(|p| p.resize_bilinear(self.input_hw, self.input_hw))
            .collect();
        if self.history.len() == self.frame_stack {
            self.history.pop_front();
        }
        self.history.push_back(resized.clone());
        Ok(resized)
    }

    /// Flattened network input: the last `frame_stack` memory outputs, oldest
    /// first, zero-padded at the front of an episode. Length is
    /// `channels() * input_hw * input_hw`.
    pub fn input(&self) -> Vec<f32> {
        let plane = self.input_hw * self.input_hw;
        let mut out = vec![0.0f32; self.channels() * plane];
        let pad = self.frame_stack - self.history.len();
        for (slot, planes) in self.history.iter().enumerate() {
            let base = (pad + slot) * self.planes_per_step() * plane;
            for (c, img) in planes.iter().enumerate() {
                out[base + c * plane..base + (c + 1) * plane].copy_from_slice(img.as_slice());
            }
        }
        out
    }
}
