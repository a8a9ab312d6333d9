use crate::error::{Error, Result};

/// Network shape and the two ablation switches.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Embedding width followed by the four stage widths.
    pub channels: [usize; 5],
    pub encoder_depths: [usize; 4],
    pub decoder_depths: [usize; 4],
    pub heads: usize,
    pub patch_capacity: usize,
    /// Voxel size of the input; the full-resolution grid.
    pub voxel: f64,
    /// Pooling grid of the first stage; each further stage doubles it.
    pub base_grid: f64,
    pub ti_enabled: bool,
    pub mt_enabled: bool,
}

impl ModelConfig {
    /// CPU-sized widths with the full stage layout.
    pub fn desk(voxel: f64) -> Self {
        ModelConfig {
            channels: [16, 16, 32, 64, 128],
            encoder_depths: [2, 2, 6, 2],
            decoder_depths: [2, 2, 2, 2],
            heads: 4,
            patch_capacity: 1024,
            voxel,
            base_grid: 2.0 * voxel,
            ti_enabled: true,
            mt_enabled: true,
        }
    }

    /// Smallest configuration that still has every component; for gradient checks.
    pub fn miniature(voxel: f64) -> Self {
        ModelConfig {
            channels: [4; 5],
            encoder_depths: [1; 4],
            decoder_depths: [1; 4],
            heads: 2,
            patch_capacity: 5,
            voxel,
            base_grid: 2.0 * voxel,
            ti_enabled: true,
            mt_enabled: true,
        }
    }

    /// Grid size at `level`: the voxel size at 0, then `base_grid · 2^(level-1)`.
    pub fn grid_at(&self, level: usize) -> f64 {
        if level == 0 {
            self.voxel
        } else {
            self.base_grid * (1u64 << (level - 1)) as f64
        }
    }

    /// Length unit of the embedding input: the coarsest pooling grid, so
    /// sample coordinates enter at the same order of magnitude as the indicator.
    pub fn coordinate_scale(&self) -> f64 {
        self.grid_at(4)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_depths.contains(&0) || self.decoder_depths.contains(&0) {
            return Err(Error::Config("block depths must be positive".into()));
        }
        if self.heads == 0 {
            return Err(Error::Config("heads must be positive".into()));
        }
        if let Some(c) = self.channels.iter().find(|&&c| c == 0 || c % self.heads != 0) {
            return Err(Error::Config(format!("{c} channels not divisible by {} heads", self.heads)));
        }
        if self.patch_capacity == 0 {
            return Err(Error::Config("patch capacity must be positive".into()));
        }
        if !(self.voxel > 0.0) || !self.voxel.is_finite() {
            return Err(Error::Config(format!("voxel size must be positive, got {}", self.voxel)));
        }
        if !(self.base_grid > self.voxel) || !self.base_grid.is_finite() {
            return Err(Error::Config(format!(
                "base grid {} must exceed the voxel size {}",
                self.base_grid, self.voxel
            )));
        }
        Ok(())
    }
}
