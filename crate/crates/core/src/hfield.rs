//! Height-field terrain with bilinear sampling.
//!
//! A [`HeightField`] stores a grid of normalized elevations in `[0, 1]`
//! together with its world placement. [`HeightField::sample_height`] maps a
//! world `(x, y)` point onto the grid and interpolates bilinearly;
//! [`HeightField::sample_points`] evaluates a set of XY offsets attached to a
//! body frame, aligned in world, yaw, or full-body mode, returning either
//! terrain height or frame clearance.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// How local XY offsets are aligned to the frame before sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignMode {
    /// Offsets are world-frame displacements; the frame rotation is ignored.
    World,
    /// Offsets rotate with the frame's yaw only.
    Yaw,
    /// Offsets rotate with the full frame rotation, then project to XY.
    Body,
}

impl AlignMode {
    /// Parses a mode name. `world` and `none` alias, as do `body` and `full`.
    pub fn parse(name: &str) -> Option<AlignMode> {
        match name {
            "world" | "none" => Some(AlignMode::World),
            "yaw" => Some(AlignMode::Yaw),
            "body" | "full" => Some(AlignMode::Body),
            _ => None,
        }
    }
}

/// Grid of normalized elevations with world placement.
///
/// Row index runs along +y, column index along +x. `size` holds
/// `(sx, sy, sz, base)`: the x/y half-extents in meters, the elevation scale
/// applied to the normalized data, and a base thickness that is carried but
/// unused by sampling. `center` is the world (x, y) of the grid center and
/// `z0` the world z of elevation zero.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightField {
    pub nrow: usize,
    pub ncol: usize,
    /// Row-major normalized elevations, `data[r * ncol + c]` in `[0, 1]`.
    pub data: Vec<f64>,
    pub size: [f64; 4],
    pub center: [f64; 2],
    pub z0: f64,
}

impl HeightField {
    /// Validates and builds a height field.
    pub fn new(
        nrow: usize,
        ncol: usize,
        data: Vec<f64>,
        size: [f64; 4],
        center: [f64; 2],
        z0: f64,
    ) -> Result<HeightField> {
        if nrow < 2 || ncol < 2 {
            return Err(Error::InvalidHeightField(format!(
                "grid must be at least 2x2, got {nrow}x{ncol}"
            )));
        }
        if data.len() != nrow * ncol {
            return Err(Error::InvalidHeightField(format!(
                "expected {} elevations, got {}",
                nrow * ncol,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidHeightField(format!(
                "elevation {bad} outside [0, 1]"
            )));
        }
        for (i, s) in size[..3].iter().enumerate() {
            if !(*s > 0.0) {
                return Err(Error::InvalidHeightField(format!(
                    "size[{i}] = {s} must be positive"
                )));
            }
        }
        Ok(HeightField {
            nrow,
            ncol,
            data,
            size,
            center,
            z0,
        })
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.ncol + c]
    }

    /// World terrain height under `(wx, wy)`.
    ///
    /// Points outside the extent clamp to the boundary, so the edge value
    /// extends outward.
    pub fn sample_height(&self, wx: f64, wy: f64) -> f64 {
        let (sx, sy, sz) = (self.size[0], self.size[1], self.size[2]);
        let u = (wx - self.center[0] + sx) / (2.0 * sx) * (self.ncol - 1) as f64;
        let v = (wy - self.center[1] + sy) / (2.0 * sy) * (self.nrow - 1) as f64;
        let u = u.clamp(0.0, (self.ncol - 1) as f64);
        let v = v.clamp(0.0, (self.nrow - 1) as f64);

        let c0 = (u.floor() as usize).min(self.ncol - 2);
        let r0 = (v.floor() as usize).min(self.nrow - 2);
        let fu = u - c0 as f64;
        let fv = v - r0 as f64;

        let interp = (1.0 - fu) * (1.0 - fv) * self.at(r0, c0)
            + fu * (1.0 - fv) * self.at(r0, c0 + 1)
            + (1.0 - fu) * fv * self.at(r0 + 1, c0)
            + fu * fv * self.at(r0 + 1, c0 + 1);
        self.z0 + interp * sz
    }

    /// Samples terrain under XY offsets attached to a frame.
    ///
    /// Each offset is mapped to a world query point `frame_xy + M * offset`
    /// where `M` depends on `mode`. With `return_clearance` the output is
    /// `frame_z - terrain_z` (frame origin z in every mode); otherwise it is
    /// the terrain height itself.
    pub fn sample_points(
        &self,
        frame_pos: &Vector3<f64>,
        frame_rot: &Matrix3<f64>,
        offsets: &[[f64; 2]],
        mode: AlignMode,
        return_clearance: bool,
    ) -> Vec<f64> {
        let mut out = Vec::with_capacity(offsets.len());
        // Yaw extraction: atan2(R10, R00), defined as 0 when both vanish.
        let (cy, sy) = match mode {
            AlignMode::Yaw => {
                if frame_rot[(1, 0)] == 0.0 && frame_rot[(0, 0)] == 0.0 {
                    (1.0, 0.0)
                } else {
                    let yaw = frame_rot[(1, 0)].atan2(frame_rot[(0, 0)]);
                    (yaw.cos(), yaw.sin())
                }
            }
            _ => (1.0, 0.0),
        };
        for off in offsets {
            let (dx, dy) = match mode {
                AlignMode::World => (off[0], off[1]),
                AlignMode::Yaw => (cy * off[0] - sy * off[1], sy * off[0] + cy * off[1]),
                AlignMode::Body => (
                    frame_rot[(0, 0)] * off[0] + frame_rot[(0, 1)] * off[1],
                    frame_rot[(1, 0)] * off[0] + frame_rot[(1, 1)] * off[1],
                ),
            };
            let z = self.sample_height(frame_pos.x + dx, frame_pos.y + dy);
            out.push(if return_clearance { frame_pos.z - z } else { z });
        }
        out
    }
}

/// Parses a plain-text elevation matrix: one row per line, values separated
/// by commas or whitespace. Blank lines and `#` comments are skipped.
pub fn parse_elevation_grid(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    Error::InvalidHeightField(format!("line {}: bad value `{t}`", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    let nrow = rows.len();
    let ncol = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncol) {
        return Err(Error::InvalidHeightField("ragged elevation grid".into()));
    }
    Ok((nrow, ncol, rows.into_iter().flatten().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp2x2() -> HeightField {
        // rows [[0,1],[0,1]]: elevation rises along +x
        HeightField::new(2, 2, vec![0.0, 1.0, 0.0, 1.0], [1.0, 1.0, 2.0, 0.1], [0.0, 0.0], 0.0)
            .unwrap()
    }

    // Direct nested-lerp bilinear evaluation, kept independent of the
    // weighted-corner implementation above.
    fn oracle_sample(hf: &HeightField, wx: f64, wy: f64) -> f64 {
        let (sx, sy) = (hf.size[0], hf.size[1]);
        let u = ((wx - hf.center[0] + sx) / (2.0 * sx) * (hf.ncol - 1) as f64)
            .clamp(0.0, (hf.ncol - 1) as f64);
        let v = ((wy - hf.center[1] + sy) / (2.0 * sy) * (hf.nrow - 1) as f64)
            .clamp(0.0, (hf.nrow - 1) as f64);
        let c0 = (u.floor() as usize).min(hf.ncol - 2);
        let r0 = (v.floor() as usize).min(hf.nrow - 2);
        let (fu, fv) = (u - c0 as f64, v - r0 as f64);
        let top = hf.at(r0, c0) + fu * (hf.at(r0, c0 + 1) - hf.at(r0, c0));
        let bot = hf.at(r0 + 1, c0) + fu * (hf.at(r0 + 1, c0 + 1) - hf.at(r0 + 1, c0));
        hf.z0 + (top + fv * (bot - top)) * hf.size[2]
    }

    #[test]
    fn grid_node_values_are_exact() {
        let hf = ramp2x2();
        assert_eq!(hf.sample_height(-1.0, -1.0), 0.0);
        assert_eq!(hf.sample_height(1.0, -1.0), 2.0);
        assert_eq!(hf.sample_height(1.0, 1.0), 2.0);
    }

    #[test]
    fn midpoint_is_corner_mean() {
        let hf = ramp2x2();
        assert_eq!(hf.sample_height(0.0, 0.0), 1.0);
    }

    #[test]
    fn out_of_extent_clamps_to_boundary() {
        let hf = ramp2x2();
        assert_eq!(hf.sample_height(5.0, 0.3), hf.sample_height(1.0, 0.3));
        assert_eq!(hf.sample_height(-7.0, -9.0), hf.sample_height(-1.0, -1.0));
        assert_eq!(hf.sample_height(0.25, 3.0), hf.sample_height(0.25, 1.0));
    }

    #[test]
    fn node_exactness_on_larger_grid() {
        let nrow = 5;
        let ncol = 7;
        let data: Vec<f64> = (0..nrow * ncol).map(|i| (i % 10) as f64 / 10.0).collect();
        let hf =
            HeightField::new(nrow, ncol, data, [1.5, 2.0, 3.0, 0.1], [0.4, -0.2], 0.7).unwrap();
        for r in 0..nrow {
            for c in 0..ncol {
                let wx = hf.center[0] - hf.size[0]
                    + 2.0 * hf.size[0] * c as f64 / (ncol - 1) as f64;
                let wy = hf.center[1] - hf.size[1]
                    + 2.0 * hf.size[1] * r as f64 / (nrow - 1) as f64;
                let expect = hf.z0 + hf.at(r, c) * hf.size[2];
                assert!(
                    (hf.sample_height(wx, wy) - expect).abs() <= 1e-15,
                    "node ({r},{c})"
                );
            }
        }
    }

    #[test]
    fn world_mode_with_zero_offset_matches_sample_height() {
        let hf = ramp2x2();
        let pos = Vector3::new(0.3, -0.4, 2.0);
        let rot = Matrix3::identity();
        let out = hf.sample_points(&pos, &rot, &[[0.0, 0.0]], AlignMode::World, false);
        assert_eq!(out[0], hf.sample_height(0.3, -0.4));
    }

    #[test]
    fn yaw_mode_rotates_offsets() {
        let hf = HeightField::new(
            2,
            2,
            vec![0.0, 1.0, 0.5, 1.0],
            [4.0, 4.0, 1.0, 0.1],
            [0.0, 0.0],
            0.0,
        )
        .unwrap();
        let yaw = std::f64::consts::FRAC_PI_2;
        let rot = Matrix3::new(
            yaw.cos(),
            -yaw.sin(),
            0.0,
            yaw.sin(),
            yaw.cos(),
            0.0,
            0.0,
            0.0,
            1.0,
        );
        let pos = Vector3::new(0.5, 0.5, 0.0);
        let out = hf.sample_points(&pos, &rot, &[[1.0, 0.0]], AlignMode::Yaw, false);
        // offset (1,0) under yaw pi/2 queries frame_xy + (0,1)
        let direct = hf.sample_height(0.5, 1.5);
        assert!((out[0] - direct).abs() <= 1e-15);
    }

    #[test]
    fn clearance_on_flat_field_is_frame_height_minus_terrain() {
        let hf = HeightField::new(
            3,
            3,
            vec![0.25; 9],
            [1.0, 1.0, 2.0, 0.1],
            [0.0, 0.0],
            0.5,
        )
        .unwrap();
        let pos = Vector3::new(0.1, 0.2, 3.0);
        let rot = Matrix3::identity();
        let offsets = [[0.0, 0.0], [0.3, -0.3], [5.0, 5.0]];
        for mode in [AlignMode::World, AlignMode::Yaw, AlignMode::Body] {
            let out = hf.sample_points(&pos, &rot, &offsets, mode, true);
            for v in out {
                assert_eq!(v, 3.0 - (0.5 + 0.25 * 2.0));
            }
        }
    }

    #[test]
    fn modes_coincide_bitwise_under_identity_rotation() {
        let hf = ramp2x2();
        let pos = Vector3::new(-0.2, 0.7, 1.3);
        let rot = Matrix3::identity();
        let offsets = [[0.4, -0.9], [-1.0, 0.0], [0.0, 0.25], [2.0, -3.0]];
        let w = hf.sample_points(&pos, &rot, &offsets, AlignMode::World, false);
        let y = hf.sample_points(&pos, &rot, &offsets, AlignMode::Yaw, false);
        let b = hf.sample_points(&pos, &rot, &offsets, AlignMode::Body, false);
        for i in 0..offsets.len() {
            assert_eq!(w[i].to_bits(), y[i].to_bits());
            assert_eq!(w[i].to_bits(), b[i].to_bits());
        }
    }

    #[test]
    fn yaw_only_rotation_makes_body_match_yaw() {
        let hf = HeightField::new(
            4,
            4,
            (0..16).map(|i| i as f64 / 15.0).collect(),
            [2.0, 2.0, 1.5, 0.1],
            [0.3, 0.1],
            -0.2,
        )
        .unwrap();
        let pos = Vector3::new(0.4, -0.6, 1.0);
        let offsets = [[0.5, 0.0], [0.0, 0.5], [-0.7, 0.3]];
        for yaw in [0.0f64, 0.4, -1.2, 2.9] {
            let rot = Matrix3::new(
                yaw.cos(),
                -yaw.sin(),
                0.0,
                yaw.sin(),
                yaw.cos(),
                0.0,
                0.0,
                0.0,
                1.0,
            );
            let y = hf.sample_points(&pos, &rot, &offsets, AlignMode::Yaw, false);
            let b = hf.sample_points(&pos, &rot, &offsets, AlignMode::Body, false);
            for i in 0..offsets.len() {
                // atan2 + cos/sin round-trips within a couple of ulps of the
                // direct matrix product, not bitwise.
                assert!((y[i] - b[i]).abs() <= 1e-14, "yaw {yaw} point {i}");
            }
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(HeightField::new(1, 2, vec![0.0, 0.0], [1.0, 1.0, 1.0, 0.0], [0.0, 0.0], 0.0)
            .is_err());
        assert!(HeightField::new(2, 2, vec![0.0; 3], [1.0, 1.0, 1.0, 0.0], [0.0, 0.0], 0.0)
            .is_err());
        assert!(HeightField::new(
            2,
            2,
            vec![0.0, 0.5, 1.2, 0.0],
            [1.0, 1.0, 1.0, 0.0],
            [0.0, 0.0],
            0.0
        )
        .is_err());
        assert!(HeightField::new(
            2,
            2,
            vec![0.0; 4],
            [0.0, 1.0, 1.0, 0.0],
            [0.0, 0.0],
            0.0
        )
        .is_err());
    }

    #[test]
    fn parses_csv_and_whitespace_grids() {
        let (nr, nc, data) = parse_elevation_grid("0, 0.5, 1\n0.25 0.75 1.0\n").unwrap();
        assert_eq!((nr, nc), (2, 3));
        assert_eq!(data, vec![0.0, 0.5, 1.0, 0.25, 0.75, 1.0]);
        assert!(parse_elevation_grid("0 1\n0\n").is_err());
        assert!(parse_elevation_grid("0 x\n").is_err());
    }

    proptest! {
        #[test]
        fn matches_independent_bilinear_oracle(
            seed_data in proptest::collection::vec(0.0f64..=1.0, 64),
            pts in proptest::collection::vec((-1.5f64..1.5, -2.5f64..2.5), 50),
        ) {
            let hf = HeightField::new(8, 8, seed_data, [1.5, 2.5, 3.0, 0.2], [0.1, -0.3], 0.4)
                .unwrap();
            for (wx, wy) in pts {
                let got = hf.sample_height(wx, wy);
                let want = oracle_sample(&hf, wx, wy);
                prop_assert!((got - want).abs() <= 1e-12);
            }
        }
    }
}
