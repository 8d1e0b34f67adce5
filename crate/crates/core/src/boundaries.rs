//! Boundary conditions by the method of images.
//!
//! Each reflected dimension gains one qubit, placed as the most significant
//! qubit of that dimension's sub-register. Hadamard on it followed by CNOTs
//! onto the coordinate qubits writes the bit-complement mirror `j -> N-1-j`
//! of the field into the upper half of the doubled axis; an extra Z before the
//! fan-out flips the sign of the mirror copy. Periodic dynamics on the doubled
//! axis then see the ghost value `phi_{-1} = ±phi_0` at each wall.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{marching_matrix_shaped, BoundaryType};
use crate::sparse::CsrMatrix;
use crate::statevector::{Circuit, GateOp, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reflection {
    None,
    /// Sign-preserving image, homogeneous Neumann.
    Even,
    /// Sign-changing image, homogeneous Dirichlet.
    Odd,
}

impl Reflection {
    fn sign(self) -> f64 {
        if self == Reflection::Odd {
            -1.0
        } else {
            1.0
        }
    }

    pub fn is_reflected(self) -> bool {
        self != Reflection::None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReflectionSpec(Vec<Reflection>);

impl ReflectionSpec {
    pub fn new(per_dim: Vec<Reflection>) -> Result<Self> {
        if per_dim.is_empty() {
            return Err(Error::InvalidArgument("need at least one dimension".into()));
        }
        Ok(Self(per_dim))
    }

    pub fn uniform(dims: usize, r: Reflection) -> Result<Self> {
        Self::new(vec![r; dims])
    }

    pub fn per_dim(&self) -> &[Reflection] {
        &self.0
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn reflected_count(&self) -> usize {
        self.0.iter().filter(|r| r.is_reflected()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimLayout {
    /// First (most significant) qubit of the dimension's sub-register.
    pub offset: usize,
    /// Qubits addressing the `N` points of the physical domain.
    pub coord_qubits: usize,
    pub reflection: Reflection,
}

impl DimLayout {
    pub fn size(&self) -> usize {
        self.coord_qubits + usize::from(self.reflection.is_reflected())
    }

    pub fn reflection_qubit(&self) -> Option<usize> {
        self.reflection.is_reflected().then_some(self.offset)
    }

    fn coord_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + usize::from(self.reflection.is_reflected());
        start..start + self.coord_qubits
    }
}

/// Work-register layout: dimensions in order, each with an optional
/// reflection qubit ahead of its coordinate qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    dims: Vec<DimLayout>,
}

impl RegisterLayout {
    pub fn new(spec: &ReflectionSpec, coord_qubits: usize) -> Self {
        let mut offset = 0;
        let dims = spec
            .per_dim()
            .iter()
            .map(|&reflection| {
                let d = DimLayout {
                    offset,
                    coord_qubits,
                    reflection,
                };
                offset += d.size();
                d
            })
            .collect();
        Self { dims }
    }

    pub fn dims(&self) -> &[DimLayout] {
        &self.dims
    }

    pub fn n_qubits(&self) -> usize {
        self.dims.iter().map(DimLayout::size).sum()
    }

    /// Sub-register sizes, i.e. `log2` of each (possibly doubled) axis.
    pub fn qubits_per_dim(&self) -> Vec<usize> {
        self.dims.iter().map(DimLayout::size).collect()
    }

    pub fn reflection_qubits(&self) -> Vec<usize> {
        self.dims
            .iter()
            .filter_map(DimLayout::reflection_qubit)
            .collect()
    }

    /// Axis lengths of the (possibly doubled) register grid.
    pub fn shape(&self) -> Vec<usize> {
        self.dims.iter().map(|d| 1 << d.size()).collect()
    }

    /// Register indices of the physical-domain points in row-major order.
    pub fn quadrant_indices(&self) -> Vec<usize> {
        let n = 1usize << self.dims[0].coord_qubits;
        let shape = self.shape();
        let count = n.pow(self.dims.len() as u32);
        (0..count)
            .map(|flat| {
                let mut rem = flat;
                let mut coords = vec![0; shape.len()];
                for k in (0..shape.len()).rev() {
                    coords[k] = rem % n;
                    rem /= n;
                }
                coords
                    .iter()
                    .zip(&shape)
                    .fold(0, |acc, (&c, &len)| acc * len + c)
            })
            .collect()
    }

    fn matches(&self, spec: &ReflectionSpec) -> bool {
        self.dims.len() == spec.dims()
            && self
                .dims
                .iter()
                .zip(spec.per_dim())
                .all(|(d, r)| d.reflection == *r)
    }
}

/// Prepares `|0>|phi>` into the mirrored superposition, one H (+Z for odd)
/// and a CNOT fan-out per reflected dimension.
pub fn reflect_circuit(spec: &ReflectionSpec, layout: &RegisterLayout) -> Result<Circuit> {
    if !layout.matches(spec) {
        return Err(Error::InvalidArgument(
            "register layout does not match reflection spec".into(),
        ));
    }
    let mut c = Circuit::new(layout.n_qubits());
    for d in layout.dims() {
        let Some(r) = d.reflection_qubit() else {
            continue;
        };
        c.push(GateOp::h(r))?;
        if d.reflection == Reflection::Odd {
            c.push(GateOp::z(r))?;
        }
        for q in d.coord_range() {
            c.push(GateOp::cx(r, q))?;
        }
    }
    Ok(c)
}

fn check_field(field: &[f64], n: usize, dims: usize) -> Result<()> {
    let expected = n.pow(dims as u32);
    if field.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: field.len(),
        });
    }
    Ok(())
}

/// Extends a row-major field by its per-dimension reversal (negated for odd
/// reflection). No normalization is applied.
pub fn classical_mirror(field: &[f64], n: usize, spec: &ReflectionSpec) -> Result<Vec<f64>> {
    check_field(field, n, spec.dims())?;
    let mut data = field.to_vec();
    let mut shape = vec![n; spec.dims()];
    for (axis, r) in spec.per_dim().iter().enumerate() {
        if !r.is_reflected() {
            continue;
        }
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut out = vec![0.0; data.len() * 2];
        for o in 0..outer {
            for j in 0..2 * len {
                let (src, s) = if j < len {
                    (j, 1.0)
                } else {
                    (2 * len - 1 - j, r.sign())
                };
                let from = (o * len + src) * inner;
                let to = (o * 2 * len + j) * inner;
                for i in 0..inner {
                    out[to + i] = s * data[from + i];
                }
            }
        }
        data = out;
        shape[axis] *= 2;
    }
    Ok(data)
}

/// Matrix-free counterpart of uncomputing the reflection and keeping the
/// all-zero reflection branch: along each reflected axis
/// `out_j = (x_j ± x_{2N-1-j}) / √2`.
pub fn fold_quadrant(doubled: &[f64], n: usize, spec: &ReflectionSpec) -> Result<Vec<f64>> {
    let mut shape: Vec<usize> = spec
        .per_dim()
        .iter()
        .map(|r| if r.is_reflected() { 2 * n } else { n })
        .collect();
    let expected: usize = shape.iter().product();
    if doubled.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: doubled.len(),
        });
    }
    let mut data = doubled.to_vec();
    for (axis, r) in spec.per_dim().iter().enumerate() {
        if !r.is_reflected() {
            continue;
        }
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut out = vec![0.0; data.len() / 2];
        for o in 0..outer {
            for j in 0..n {
                let a = (o * 2 * n + j) * inner;
                let b = (o * 2 * n + 2 * n - 1 - j) * inner;
                let to = (o * n + j) * inner;
                for i in 0..inner {
                    out[to + i] =
                        (data[a + i] + r.sign() * data[b + i]) * std::f64::consts::FRAC_1_SQRT_2;
                }
            }
        }
        data = out;
        shape[axis] = n;
    }
    Ok(data)
}

/// The bounded operator realized by periodic marching on the doubled grid:
/// `E phi = restrict(A_periodic · mirror(phi))`, built column by column from
/// mirrored basis vectors.
pub fn effective_matrix(spec: &ReflectionSpec, r_h: f64, n: usize) -> Result<CsrMatrix> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "points per dimension must be a power of two, got {n}"
        )));
    }
    let layout = RegisterLayout::new(spec, n.trailing_zeros() as usize);
    let doubled = marching_matrix_shaped(
        &layout.qubits_per_dim(),
        &vec![BoundaryType::Periodic; spec.dims()],
        r_h,
    );
    // column access through the transpose
    let columns = CsrMatrix::from_triplets(
        doubled.ncols(),
        doubled.nrows(),
        doubled.triplets().map(|(r, c, v)| (c, r, v)).collect(),
    );
    let quadrant = layout.quadrant_indices();
    let mut to_quadrant = vec![usize::MAX; doubled.nrows()];
    for (k, &idx) in quadrant.iter().enumerate() {
        to_quadrant[idx] = k;
    }
    let shape = layout.shape();

    let mut triplets = Vec::new();
    for (col, &base) in quadrant.iter().enumerate() {
        for (img, sign) in images(base, &shape, spec) {
            for (row, v) in columns.row(img) {
                let q = to_quadrant[row];
                if q != usize::MAX {
                    triplets.push((q, col, sign * v));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(
        quadrant.len(),
        quadrant.len(),
        triplets,
    ))
}

/// All mirror images (with signs) of a quadrant point on the doubled grid.
fn images(index: usize, shape: &[usize], spec: &ReflectionSpec) -> Vec<(usize, f64)> {
    let mut coords = vec![0; shape.len()];
    let mut rem = index;
    for k in (0..shape.len()).rev() {
        coords[k] = rem % shape[k];
        rem /= shape[k];
    }
    let mut out = vec![(coords.clone(), 1.0)];
    for (axis, r) in spec.per_dim().iter().enumerate() {
        if !r.is_reflected() {
            continue;
        }
        let extra: Vec<_> = out
            .iter()
            .map(|(c, s)| {
                let mut c = c.clone();
                c[axis] = shape[axis] - 1 - c[axis];
                (c, s * r.sign())
            })
            .collect();
        out.extend(extra);
    }
    out.into_iter()
        .map(|(c, s)| {
            (
                c.iter().zip(shape).fold(0, |acc, (&x, &len)| acc * len + x),
                s,
            )
        })
        .collect()
}

/// Probability that every reflection qubit reads 0 on a work register whose
/// reflection has been uncomputed.
pub fn boundary_postselect_probability(
    state: &StateVector,
    layout: &RegisterLayout,
) -> Result<f64> {
    let qubits = layout.reflection_qubits();
    if qubits.is_empty() {
        return Ok(1.0);
    }
    state.probability_zero(&qubits)
}
