use alloc::vec::Vec;

use super::dense;
use super::grouping::{farthest_point_sample, interpolation, radius_groups, Interp};
use super::{LayerShape, NetArchitecture, NetParams};
use crate::geometry::Vec3;
use crate::real::Real;
use crate::{Error, Result};

/// Activations of a stack of dense layers: `acts[0]` is the input,
/// `acts[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
struct MlpTape<T> {
    first_layer: usize,
    rows: usize,
    acts: Vec<Vec<T>>,
}

#[derive(Debug, Clone)]
struct EncoderTape<T> {
    /// Row-major `group_size` member indices into the previous level.
    groups: Vec<usize>,
    mlp: MlpTape<T>,
    /// For each (centroid, channel), the group slot that won the max-pool.
    argmax: Vec<u32>,
    /// Pooled features, one row per centroid.
    pooled: Vec<T>,
}

#[derive(Debug, Clone)]
struct DecoderTape<T> {
    interp: Vec<Interp>,
    /// Width of the interpolated part of the layer input.
    interp_dim: usize,
    mlp: MlpTape<T>,
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct Tape<T: Real> {
    /// Point positions per level (level 0 is the input subset).
    positions: Vec<Vec<Vec3>>,
    dims: Vec<usize>,
    encoder: Vec<EncoderTape<T>>,
    decoder: Vec<DecoderTape<T>>,
    head: MlpTape<T>,
    offsets: Vec<[T; 3]>,
}

impl<T: Real> Tape<T> {
    /// Predicted offsets `Δ`, one per input point.
    pub fn offsets(&self) -> &[[T; 3]] {
        &self.offsets
    }
}

fn run_mlp<T: Real>(
    params: &NetParams<T>,
    first_layer: usize,
    count: usize,
    input: Vec<T>,
    rows: usize,
) -> MlpTape<T> {
    let mut acts = Vec::with_capacity(count + 1);
    acts.push(input);
    for li in first_layer..first_layer + count {
        let shape = &params.layers()[li];
        let mut out = alloc::vec![T::zero(); rows * shape.out_dim];
        dense::forward(
            &acts[acts.len() - 1],
            rows,
            shape.in_dim,
            params.weights(li),
            params.bias(li),
            shape.relu,
            &mut out,
        );
        acts.push(out);
    }
    MlpTape {
        first_layer,
        rows,
        acts,
    }
}

impl<T> MlpTape<T> {
    fn output(&self) -> &[T] {
        &self.acts[self.acts.len() - 1]
    }
}

/// Offsets `Δ` for `subset` (normalized frame). The predicted target is `subset + Δ`.
pub fn forward<T: Real>(
    params: &NetParams<T>,
    arch: &NetArchitecture,
    subset: &[[T; 3]],
) -> Result<Vec<[T; 3]>> {
    Ok(forward_with_tape(params, arch, subset)?.offsets)
}

pub fn forward_with_tape<T: Real>(
    params: &NetParams<T>,
    arch: &NetArchitecture,
    subset: &[[T; 3]],
) -> Result<Tape<T>> {
    params.matches(arch)?;
    let m = subset.len();
    let min = arch.min_points();
    if m < min {
        return Err(Error::InsufficientPoints {
            needed: min,
            got: m,
        });
    }
    let level0: Vec<Vec3> = subset
        .iter()
        .map(|p| Vec3::new(p[0].as_f64(), p[1].as_f64(), p[2].as_f64()))
        .collect();
    let feat0: Vec<T> = subset.iter().flat_map(|p| p.iter().copied()).collect();

    let sizes = arch.level_sizes(m);
    let mut positions = alloc::vec![level0];
    let mut dims = alloc::vec![3usize];
    let mut layer = 0usize;
    let mut encoder: Vec<EncoderTape<T>> = Vec::with_capacity(arch.encoder.len());

    for (l, level) in arch.encoder.iter().enumerate() {
        let prev = &positions[l];
        let prev_feat: &[T] = if l == 0 {
            &feat0
        } else {
            &encoder[l - 1].pooled
        };
        let prev_dim = dims[l];
        let centroid_idx = farthest_point_sample(prev, sizes[l + 1]);
        let centroids: Vec<Vec3> = centroid_idx.iter().map(|&i| prev[i]).collect();
        let k = level.group_size;
        let groups = radius_groups(prev, &centroids, level.radius, k);
        let in_dim = 3 + prev_dim;
        let rows = centroids.len() * k;
        let mut input = Vec::with_capacity(rows * in_dim);
        for (c, centre) in centroids.iter().enumerate() {
            for &q in &groups[c * k..(c + 1) * k] {
                let rel = prev[q] - *centre;
                input.push(T::from_f64(rel.x));
                input.push(T::from_f64(rel.y));
                input.push(T::from_f64(rel.z));
                input.extend_from_slice(&prev_feat[q * prev_dim..(q + 1) * prev_dim]);
            }
        }
        let mlp = run_mlp(params, layer, level.widths.len(), input, rows);
        layer += level.widths.len();
        let out_dim = *level.widths.last().unwrap_or(&0);
        let (pooled, argmax) = max_pool(mlp.output(), centroids.len(), k, out_dim);
        encoder.push(EncoderTape {
            groups,
            mlp,
            argmax,
            pooled,
        });
        positions.push(centroids);
        dims.push(out_dim);
    }

    let depth = arch.encoder.len();
    let mut decoder: Vec<DecoderTape<T>> = Vec::with_capacity(depth);
    for (j, widths) in arch.decoder.iter().enumerate() {
        let target = depth - 1 - j;
        let source = target + 1;
        let (cur, cur_dim): (&[T], usize) = if j == 0 {
            (&encoder[depth - 1].pooled, dims[depth])
        } else {
            (
                decoder[j - 1].mlp.output(),
                arch.decoder[j - 1][arch.decoder[j - 1].len() - 1],
            )
        };
        let interp = interpolation(&positions[target], &positions[source]);
        let skip: &[T] = if target == 0 {
            &feat0
        } else {
            &encoder[target - 1].pooled
        };
        let skip_dim = dims[target];
        let rows = positions[target].len();
        let in_dim = cur_dim + skip_dim;
        let mut input = alloc::vec![T::zero(); rows * in_dim];
        for (r, ip) in interp.iter().enumerate() {
            let row = &mut input[r * in_dim..(r + 1) * in_dim];
            for s in 0..3 {
                if ip.weight[s] == 0.0 {
                    continue;
                }
                let w = T::from_f64(ip.weight[s]);
                let src = &cur[ip.idx[s] * cur_dim..(ip.idx[s] + 1) * cur_dim];
                dense::axpy(w, src, &mut row[..cur_dim]);
            }
            row[cur_dim..].copy_from_slice(&skip[r * skip_dim..(r + 1) * skip_dim]);
        }
        let mlp = run_mlp(params, layer, widths.len(), input, rows);
        layer += widths.len();
        decoder.push(DecoderTape {
            interp,
            interp_dim: cur_dim,
            mlp,
        });
    }

    let head_input: Vec<T> = match decoder.last() {
        Some(d) => d.mlp.output().to_vec(),
        None => feat0.clone(),
    };
    let head = run_mlp(params, layer, arch.head.len(), head_input, m);
    let offsets = head
        .output()
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();

    Ok(Tape {
        positions,
        dims,
        encoder,
        decoder,
        head,
        offsets,
    })
}

fn max_pool<T: Real>(h: &[T], groups: usize, k: usize, dim: usize) -> (Vec<T>, Vec<u32>) {
    let mut pooled = alloc::vec![T::zero(); groups * dim];
    let mut argmax = alloc::vec![0u32; groups * dim];
    for g in 0..groups {
        let out = &mut pooled[g * dim..(g + 1) * dim];
        let arg = &mut argmax[g * dim..(g + 1) * dim];
        out.copy_from_slice(&h[g * k * dim..g * k * dim + dim]);
        for j in 1..k {
            let row = &h[(g * k + j) * dim..(g * k + j + 1) * dim];
            for o in 0..dim {
                if row[o] > out[o] {
                    out[o] = row[o];
                    arg[o] = j as u32;
                }
            }
        }
    }
    (pooled, argmax)
}

/// Backward through a stack of dense layers. Returns the gradient w.r.t. the
/// stack input when `need_input` is set.
fn mlp_backward<T: Real>(
    params: &NetParams<T>,
    tape: &MlpTape<T>,
    mut grad_out: Vec<T>,
    grads: &mut [T],
    need_input: bool,
) -> Option<Vec<T>> {
    let count = tape.acts.len() - 1;
    for step in (0..count).rev() {
        let li = tape.first_layer + step;
        let shape: &LayerShape = &params.layers()[li];
        let (dw, rest) = grads[shape.offset..shape.offset + shape.param_count()]
            .split_at_mut(shape.weight_count());
        let want_dx = step > 0 || need_input;
        let mut dx = if want_dx {
            alloc::vec![T::zero(); tape.rows * shape.in_dim]
        } else {
            Vec::new()
        };
        dense::backward(
            &tape.acts[step],
            &tape.acts[step + 1],
            &mut grad_out,
            tape.rows,
            shape.in_dim,
            params.weights(li),
            shape.relu,
            dw,
            rest,
            if want_dx { Some(&mut dx) } else { None },
        );
        grad_out = dx;
    }
    if need_input {
        Some(grad_out)
    } else {
        None
    }
}

/// Reverse-mode gradient of a scalar loss w.r.t. all parameters, given the
/// loss gradient w.r.t. the offsets.
pub fn backward<T: Real>(
    params: &NetParams<T>,
    arch: &NetArchitecture,
    tape: &Tape<T>,
    d_offsets: &[[T; 3]],
) -> Result<Vec<T>> {
    params.matches(arch)?;
    if d_offsets.len() != tape.offsets.len() {
        return Err(Error::LengthMismatch {
            what: "offset gradient",
            expected: tape.offsets.len(),
            got: d_offsets.len(),
        });
    }
    let mut grads = alloc::vec![T::zero(); params.len()];
    let depth = arch.encoder.len();
    let g_head: Vec<T> = d_offsets.iter().flat_map(|g| g.iter().copied()).collect();
    let mut d_cur = mlp_backward(params, &tape.head, g_head, &mut grads, depth > 0);

    // Gradients w.r.t. pooled encoder features, index l - 1 for level l.
    let mut d_pooled: Vec<Vec<T>> = (1..=depth)
        .map(|l| alloc::vec![T::zero(); tape.positions[l].len() * tape.dims[l]])
        .collect();

    for j in (0..depth).rev() {
        let dec = &tape.decoder[j];
        let target = depth - 1 - j;
        let source = target + 1;
        let d_out = d_cur.take().unwrap_or_default();
        let d_in = mlp_backward(params, &dec.mlp, d_out, &mut grads, true).unwrap_or_default();
        let cur_dim = dec.interp_dim;
        let skip_dim = tape.dims[target];
        let in_dim = cur_dim + skip_dim;
        let mut d_src = alloc::vec![T::zero(); tape.positions[source].len() * cur_dim];
        for (r, ip) in dec.interp.iter().enumerate() {
            let row = &d_in[r * in_dim..(r + 1) * in_dim];
            for s in 0..3 {
                if ip.weight[s] == 0.0 {
                    continue;
                }
                let w = T::from_f64(ip.weight[s]);
                dense::axpy(
                    w,
                    &row[..cur_dim],
                    &mut d_src[ip.idx[s] * cur_dim..(ip.idx[s] + 1) * cur_dim],
                );
            }
            if target > 0 {
                let dst = &mut d_pooled[target - 1][r * skip_dim..(r + 1) * skip_dim];
                for (a, &b) in dst.iter_mut().zip(&row[cur_dim..]) {
                    *a += b;
                }
            }
        }
        d_cur = Some(d_src);
    }
    if depth > 0 {
        if let Some(d) = d_cur {
            for (a, b) in d_pooled[depth - 1].iter_mut().zip(d) {
                *a += b;
            }
        }
    }

    for l in (1..=depth).rev() {
        let enc = &tape.encoder[l - 1];
        let k = arch.encoder[l - 1].group_size;
        let dim = tape.dims[l];
        let rows = enc.mlp.rows;
        let mut d_h = alloc::vec![T::zero(); rows * dim];
        let dp = &d_pooled[l - 1];
        for g in 0..tape.positions[l].len() {
            for o in 0..dim {
                let slot = enc.argmax[g * dim + o] as usize;
                d_h[(g * k + slot) * dim + o] = dp[g * dim + o];
            }
        }
        let need_input = l > 1;
        let d_in = mlp_backward(params, &enc.mlp, d_h, &mut grads, need_input);
        if let Some(d_in) = d_in {
            let prev_dim = tape.dims[l - 1];
            let in_dim = 3 + prev_dim;
            let (before, _) = d_pooled.split_at_mut(l - 1);
            let dst = &mut before[l - 2];
            for (row, &q) in enc.groups.iter().enumerate() {
                let src = &d_in[row * in_dim + 3..(row + 1) * in_dim];
                for (a, &b) in dst[q * prev_dim..(q + 1) * prev_dim].iter_mut().zip(src) {
                    *a += b;
                }
            }
        }
    }

    for layer in params.layers() {
        let slice = &grads[layer.offset..layer.offset + layer.param_count()];
        if slice.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                layer: layer.name.clone(),
            });
        }
    }
    Ok(grads)
}
