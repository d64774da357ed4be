//! Integer simplicial homology by Smith normal form, with suspension and
//! product constructions and the finite-complex checks built on them.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{invalid, Error, Result};

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidComplex(msg.into()))
}

/// A finite abstract simplicial complex. Simplices are sorted vertex tuples,
/// oriented by vertex order, stored per dimension in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplicialComplex {
    by_dim: Vec<Vec<Vec<usize>>>,
    index: Vec<HashMap<Vec<usize>, usize>>,
}

impl SimplicialComplex {
    /// Validates that every face is present, no simplex repeats, and
    /// `∂∘∂ = 0`.
    pub fn new(simplices: Vec<Vec<usize>>) -> Result<Self> {
        let mut by_dim: Vec<Vec<Vec<usize>>> = Vec::new();
        let mut seen = HashMap::new();
        for mut s in simplices {
            if s.is_empty() {
                return bad("empty simplex");
            }
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return bad(format!("simplex {s:?} repeats a vertex"));
            }
            if seen.insert(s.clone(), ()).is_some() {
                return bad(format!("duplicate simplex {s:?}"));
            }
            let d = s.len() - 1;
            if by_dim.len() <= d {
                by_dim.resize(d + 1, Vec::new());
            }
            by_dim[d].push(s);
        }
        if by_dim.is_empty() {
            return bad("complex has no simplices");
        }
        for level in by_dim.iter_mut() {
            level.sort();
        }
        let index: Vec<HashMap<Vec<usize>, usize>> = by_dim
            .iter()
            .map(|l| l.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect())
            .collect();
        for (d, level) in by_dim.iter().enumerate().skip(1) {
            for s in level {
                for f in faces(s) {
                    if !index[d - 1].contains_key(&f) {
                        return bad(format!("face {f:?} of {s:?} is missing"));
                    }
                }
            }
        }
        let x = SimplicialComplex { by_dim, index };
        for k in 2..=x.dim() {
            if !x.boundary_squares_to_zero(k) {
                return bad(format!("boundary of boundary is nonzero in degree {k}"));
            }
        }
        Ok(x)
    }

    /// The smallest complex containing `simplices`.
    pub fn closure(simplices: impl IntoIterator<Item = Vec<usize>>) -> Result<Self> {
        let mut all = BTreeSet::new();
        for mut s in simplices {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return bad("empty simplex");
            }
            add_with_faces(&mut all, s);
        }
        SimplicialComplex::new(all.into_iter().collect())
    }

    pub fn dim(&self) -> usize {
        self.by_dim.len() - 1
    }

    pub fn simplices(&self, k: usize) -> &[Vec<usize>] {
        self.by_dim.get(k).map_or(&[], Vec::as_slice)
    }

    pub fn vertices(&self) -> Vec<usize> {
        self.by_dim[0].iter().map(|s| s[0]).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.by_dim.iter().map(Vec::len).collect()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.counts().iter().enumerate().map(|(k, c)| if k % 2 == 0 { *c as i64 } else { -(*c as i64) }).sum()
    }

    /// Columns of `∂_k` as `(row, ±1)` lists.
    fn boundary_columns(&self, k: usize) -> Vec<Vec<(usize, i64)>> {
        self.simplices(k)
            .iter()
            .map(|s| {
                faces(s)
                    .enumerate()
                    .map(|(i, f)| (self.index[k - 1][&f], if i % 2 == 0 { 1 } else { -1 }))
                    .collect()
            })
            .collect()
    }

    /// Dense `∂_k`: rows are `(k-1)`-simplices, columns `k`-simplices.
    pub fn boundary_matrix(&self, k: usize) -> Vec<Vec<i64>> {
        let rows = if k == 0 { 0 } else { self.simplices(k - 1).len() };
        let mut m = vec![vec![0i64; self.simplices(k).len()]; rows];
        if k > 0 {
            for (j, col) in self.boundary_columns(k).into_iter().enumerate() {
                for (i, v) in col {
                    m[i][j] = v;
                }
            }
        }
        m
    }

    fn boundary_squares_to_zero(&self, k: usize) -> bool {
        let lower = self.boundary_columns(k - 1);
        self.boundary_columns(k).iter().all(|col| {
            let mut acc: HashMap<usize, i64> = HashMap::new();
            for &(i, a) in col {
                for &(r, b) in &lower[i] {
                    *acc.entry(r).or_default() += a * b;
                }
            }
            acc.values().all(|v| *v == 0)
        })
    }

    /// Wire form `{ "k": [[v0, ..., vk], ...] }`.
    pub fn to_json_map(&self) -> BTreeMap<String, Vec<Vec<usize>>> {
        self.by_dim.iter().enumerate().map(|(k, l)| (k.to_string(), l.clone())).collect()
    }

    pub fn from_json_map(map: &BTreeMap<String, Vec<Vec<usize>>>) -> Result<Self> {
        let mut all = Vec::new();
        for (k, list) in map {
            let k: usize = k.parse().map_err(|_| Error::InvalidComplex(format!("bad dimension key {k:?}")))?;
            for s in list {
                if s.len() != k + 1 {
                    return bad(format!("simplex {s:?} listed under dimension {k}"));
                }
                all.push(s.clone());
            }
        }
        SimplicialComplex::new(all)
    }
}

impl Serialize for SimplicialComplex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_map().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SimplicialComplex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, Vec<Vec<usize>>>::deserialize(d)?;
        SimplicialComplex::from_json_map(&map).map_err(serde::de::Error::custom)
    }
}

fn faces(s: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0..s.len()).filter(move |_| s.len() > 1).map(move |i| {
        let mut f = s.to_vec();
        f.remove(i);
        f
    })
}

fn add_with_faces(set: &mut BTreeSet<Vec<usize>>, s: Vec<usize>) {
    if set.contains(&s) {
        return;
    }
    let fs: Vec<Vec<usize>> = faces(&s).collect();
    set.insert(s);
    for f in fs {
        add_with_faces(set, f);
    }
}

/// Nonzero invariant factors (positive, each dividing the next) of an
/// integer matrix.
pub fn invariant_factors(m: &[Vec<i64>]) -> Vec<BigInt> {
    let mut a: Vec<Vec<BigInt>> = m.iter().map(|r| r.iter().map(|v| BigInt::from(*v)).collect()).collect();
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut diag = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        // smallest nonzero entry of the remaining block
        let Some((pi, pj)) = min_entry(&a, (t..rows).flat_map(|i| (t..cols).map(move |j| (i, j)))) else {
            break;
        };
        a.swap(t, pi);
        for r in a.iter_mut() {
            r.swap(t, pj);
        }
        loop {
            let p = a[t][t].clone();
            let mut clean = true;
            let pivot_row: Vec<(usize, BigInt)> =
                (t..cols).filter(|&j| !a[t][j].is_zero()).map(|j| (j, a[t][j].clone())).collect();
            for i in t + 1..rows {
                if a[i][t].is_zero() {
                    continue;
                }
                let q = a[i][t].div_floor(&p);
                for (j, v) in &pivot_row {
                    let d = &q * v;
                    a[i][*j] -= d;
                }
                clean &= a[i][t].is_zero();
            }
            let pivot_col: Vec<(usize, BigInt)> =
                (t..rows).filter(|&i| !a[i][t].is_zero()).map(|i| (i, a[i][t].clone())).collect();
            for j in t + 1..cols {
                if a[t][j].is_zero() {
                    continue;
                }
                let q = a[t][j].div_floor(&p);
                for (i, v) in &pivot_col {
                    let d = &q * v;
                    a[*i][j] -= d;
                }
                clean &= a[t][j].is_zero();
            }
            if clean {
                break;
            }
            // a remainder smaller than the pivot becomes the new pivot
            let cand = (t + 1..rows).map(|i| (i, t)).chain((t + 1..cols).map(|j| (t, j)));
            let (ni, nj) = min_entry(&a, cand).expect("a nonzero remainder exists");
            a.swap(t, ni);
            for r in a.iter_mut() {
                r.swap(t, nj);
            }
        }
        diag.push(a[t][t].abs());
        t += 1;
    }
    // gcd/lcm sweeps turn the diagonal into a divisibility chain
    for i in 0..diag.len() {
        for j in i + 1..diag.len() {
            let g = diag[i].gcd(&diag[j]);
            let l = diag[i].lcm(&diag[j]);
            diag[i] = g;
            diag[j] = l;
        }
    }
    diag
}

fn min_entry(a: &[Vec<BigInt>], cells: impl Iterator<Item = (usize, usize)>) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), BigInt)> = None;
    for (i, j) in cells {
        let v = &a[i][j];
        if v.is_zero() {
            continue;
        }
        let m = v.abs();
        if m.is_one() {
            return Some((i, j));
        }
        if best.as_ref().is_none_or(|b| m < b.1) {
            best = Some(((i, j), m));
        }
    }
    best.map(|b| b.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomologyGroup {
    pub betti: usize,
    /// Invariant factors greater than one.
    pub torsion: Vec<u64>,
}

/// `H_k = Z^{betti_k} ⊕ ⊕ Z/t` for `k = 0..=dim`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomologyProfile {
    pub groups: Vec<HomologyGroup>,
}

impl HomologyProfile {
    pub fn betti(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.betti).collect()
    }

    pub fn torsion(&self, k: usize) -> &[u64] {
        self.groups.get(k).map_or(&[], |g| g.torsion.as_slice())
    }

    pub fn is_torsion_free(&self) -> bool {
        self.groups.iter().all(|g| g.torsion.is_empty())
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.groups
            .iter()
            .enumerate()
            .map(|(k, g)| if k % 2 == 0 { g.betti as i64 } else { -(g.betti as i64) })
            .sum()
    }

    /// Group in degree `k`, zero beyond the top dimension.
    pub fn group(&self, k: usize) -> HomologyGroup {
        self.groups.get(k).cloned().unwrap_or(HomologyGroup { betti: 0, torsion: Vec::new() })
    }
}

impl Serialize for HomologyProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m: BTreeMap<String, &HomologyGroup> =
            self.groups.iter().enumerate().map(|(k, g)| (k.to_string(), g)).collect();
        m.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HomologyProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = BTreeMap::<String, HomologyGroup>::deserialize(d)?;
        let mut groups = Vec::new();
        for (k, (key, g)) in m.into_iter().enumerate() {
            if key != k.to_string() {
                return Err(serde::de::Error::custom(format!("homology degrees must run 0, 1, ..: found {key}")));
            }
            groups.push(g);
        }
        Ok(HomologyProfile { groups })
    }
}

/// Integer homology of `x` in every degree up to its dimension.
pub fn homology(x: &SimplicialComplex) -> Result<HomologyProfile> {
    let top = x.dim();
    let factors: Vec<Vec<BigInt>> =
        (0..=top + 1).into_par_iter().map(|k| if k == 0 || k > top { Vec::new() } else { invariant_factors(&x.boundary_matrix(k)) }).collect();
    let mut groups = Vec::with_capacity(top + 1);
    for k in 0..=top {
        let n = x.simplices(k).len();
        let betti = n - factors[k].len() - factors[k + 1].len();
        let torsion = factors[k + 1]
            .iter()
            .filter(|f| !f.is_one())
            .map(|f| f.to_u64().ok_or_else(|| Error::DegenerateInput(format!("torsion coefficient {f} exceeds 64 bits"))))
            .collect::<Result<Vec<u64>>>()?;
        groups.push(HomologyGroup { betti, torsion });
    }
    Ok(HomologyProfile { groups })
}

/// Double cone over `x` with two new apex vertices numbered after the
/// largest existing id.
pub fn suspension(x: &SimplicialComplex) -> SimplicialComplex {
    let top = x.vertices().into_iter().max().expect("complexes are non-empty");
    let (a, b) = (top + 1, top + 2);
    let mut all: Vec<Vec<usize>> = vec![vec![a], vec![b]];
    for level in &x.by_dim {
        for s in level {
            all.push(s.clone());
            for apex in [a, b] {
                let mut c = s.clone();
                c.push(apex);
                all.push(c);
            }
        }
    }
    SimplicialComplex::new(all).expect("suspension of a valid complex is valid")
}

/// Staircase triangulation of `|x| × |y|`. Vertex `(v, w)` gets id
/// `i·|V(y)| + j` where `i`, `j` are the positions of `v`, `w` in sorted
/// vertex order.
pub fn product(x: &SimplicialComplex, y: &SimplicialComplex) -> SimplicialComplex {
    let vx: HashMap<usize, usize> = x.vertices().into_iter().enumerate().map(|(i, v)| (v, i)).collect();
    let vy: HashMap<usize, usize> = y.vertices().into_iter().enumerate().map(|(i, v)| (v, i)).collect();
    let ny = vy.len();
    let mut all = BTreeSet::new();
    for lx in &x.by_dim {
        for s in lx {
            for ly in &y.by_dim {
                for t in ly {
                    let (p, q) = (s.len() - 1, t.len() - 1);
                    // monotone lattice paths (0,0) → (p,q): choose the x-steps
                    for mask in 0u64..(1u64 << (p + q)) {
                        if mask.count_ones() as usize != p {
                            continue;
                        }
                        let (mut i, mut j) = (0, 0);
                        let mut simplex = vec![vx[&s[0]] * ny + vy[&t[0]]];
                        for step in 0..p + q {
                            if mask >> step & 1 == 1 {
                                i += 1;
                            } else {
                                j += 1;
                            }
                            simplex.push(vx[&s[i]] * ny + vy[&t[j]]);
                        }
                        simplex.sort_unstable();
                        add_with_faces(&mut all, simplex);
                    }
                }
            }
        }
    }
    SimplicialComplex::new(all.into_iter().collect()).expect("product of valid complexes is valid")
}

pub mod standard {
    //! Small named triangulations.

    use super::*;

    pub fn point() -> SimplicialComplex {
        SimplicialComplex::new(vec![vec![0]]).expect("valid")
    }

    /// `S⁰`: two points.
    pub fn two_points() -> SimplicialComplex {
        SimplicialComplex::new(vec![vec![0], vec![1]]).expect("valid")
    }

    /// `S^n` as the boundary of the standard `(n+1)`-simplex.
    pub fn sphere(n: usize) -> SimplicialComplex {
        let full: Vec<usize> = (0..n + 2).collect();
        SimplicialComplex::closure(faces(&full).collect::<Vec<_>>()).expect("valid")
    }

    /// Cycle on `k` vertices; fails with an invalid-complex error for `k < 3`
    /// where consecutive edges coincide.
    pub fn cycle(k: usize) -> Result<SimplicialComplex> {
        if k == 0 {
            return bad("a cycle needs vertices");
        }
        let mut all: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
        all.extend((0..k).map(|i| vec![i, (i + 1) % k]));
        SimplicialComplex::new(all)
    }

    /// Boundary of the octahedron, a 6-vertex `S²`.
    pub fn octahedron() -> SimplicialComplex {
        let mut tri = Vec::new();
        for z in [4, 5] {
            for i in 0..4 {
                tri.push(vec![i, (i + 1) % 4, z]);
            }
        }
        SimplicialComplex::closure(tri).expect("valid")
    }

    /// The minimal 6-vertex triangulation of the real projective plane.
    pub fn rp2() -> SimplicialComplex {
        let tri = [
            [0, 1, 2],
            [0, 2, 3],
            [0, 3, 4],
            [0, 4, 5],
            [0, 5, 1],
            [1, 2, 4],
            [2, 3, 5],
            [3, 4, 1],
            [4, 5, 2],
            [5, 1, 3],
        ];
        SimplicialComplex::closure(tri.iter().map(|t| t.to_vec())).expect("valid")
    }

    /// Closure of `count` random simplices of dimension ≤ `max_dim` on
    /// `vertices` vertices.
    pub fn random<R: Rng>(rng: &mut R, vertices: usize, count: usize, max_dim: usize) -> SimplicialComplex {
        let vertices = vertices.max(1);
        let mut all: Vec<Vec<usize>> = (0..vertices).map(|v| vec![v]).collect();
        for _ in 0..count {
            let d = rng.gen_range(0..=max_dim.min(vertices - 1));
            let mut s = BTreeSet::new();
            while s.len() < d + 1 {
                s.insert(rng.gen_range(0..vertices));
            }
            all.push(s.into_iter().collect());
        }
        SimplicialComplex::closure(all).expect("valid")
    }
}

/// Ranks predicted by the Künneth formula for torsion-free factors.
pub fn kunneth_ranks(x: &HomologyProfile, y: &HomologyProfile) -> Result<Vec<usize>> {
    if !x.is_torsion_free() || !y.is_torsion_free() {
        return invalid("Künneth ranks are only checked for torsion-free factors");
    }
    let top = x.groups.len() + y.groups.len() - 2;
    Ok((0..=top)
        .map(|k| (0..=k).map(|i| x.group(i).betti * y.group(k - i).betti).sum())
        .collect())
}

/// `H_k(X × S^m) = H_k(X) ⊕ H_{k-m}(X)` in every degree, torsion included.
pub fn sphere_product_identity(x: &SimplicialComplex, m: usize) -> Result<bool> {
    let lhs = homology(&product(x, &standard::sphere(m)))?;
    let hx = homology(x)?;
    let top = x.dim() + m;
    Ok((0..=top).all(|k| {
        let a = hx.group(k);
        let b = if k >= m { hx.group(k - m) } else { HomologyGroup { betti: 0, torsion: Vec::new() } };
        let mut torsion = [a.torsion, b.torsion].concat();
        torsion.sort_unstable();
        let mut got = lhs.group(k).torsion;
        got.sort_unstable();
        lhs.group(k).betti == a.betti + b.betti && got == torsion
    }))
}

/// `betti_{k+1}(SX) = betti_k(X)` for `k ≥ 1`, torsion shifted likewise, and
/// `betti_1(SX) = betti_0(X) - 1`.
pub fn suspension_identity(x: &SimplicialComplex) -> Result<bool> {
    let hx = homology(x)?;
    let hs = homology(&suspension(x))?;
    let top = x.dim();
    let mut ok = hs.group(0) == HomologyGroup { betti: 1, torsion: Vec::new() };
    ok &= hs.group(1).betti + 1 == hx.group(0).betti && hs.group(1).torsion == hx.group(0).torsion;
    for k in 1..=top {
        ok &= hs.group(k + 1) == hx.group(k);
    }
    Ok(ok)
}

/// Centred ellipses of area π and eccentricity `ecc`, one per major-axis
/// angle, joined into a cycle in angle order mod π.
pub fn eccentric_family_complex(angles: &[f64], ecc: f64) -> Result<SimplicialComplex> {
    if !(ecc > 1.0) {
        return invalid(format!("eccentricity {ecc} must exceed 1 for the axis angle to be defined"));
    }
    let a = ecc.sqrt();
    let mut members: Vec<(f64, Ellipsoid)> = Vec::new();
    for &t in angles {
        let t = t.rem_euclid(std::f64::consts::PI);
        let e = Ellipsoid::ellipse([0.0, 0.0], a, 1.0 / a, t)?;
        // angles differing by π give the same ellipse
        let dup = members.iter().any(|(_, m)| {
            let (s, q) = (m.shape_matrix(), e.shape_matrix());
            (s - q).abs().max() <= 1e-12
        });
        if !dup {
            members.push((t, e));
        }
    }
    members.sort_by(|x, y| x.0.total_cmp(&y.0));
    standard::cycle(members.len())
}

/// The n = 1 boundary class of centred area-π ellipses with fixed
/// eccentricity is a circle: `H₁ = Z`, and `n* + n - 1 = 1` for
/// `n* = n(n+1)/2`.
pub fn verify_n1_eccentric_family(samples: usize, ecc: f64) -> Result<bool> {
    let angles: Vec<f64> = (0..samples).map(|i| std::f64::consts::PI * i as f64 / samples as f64).collect();
    let h = homology(&eccentric_family_complex(&angles, ecc)?)?;
    let n = 1;
    let n_star = n * (n + 1) / 2;
    Ok(h.group(n_star + n - 1) == HomologyGroup { betti: 1, torsion: Vec::new() } && h.group(0).betti == 1)
}

/// Five random complexes plus `S¹`, `S²`, `RP²`.
pub fn corpus<R: Rng>(rng: &mut R) -> Vec<(String, SimplicialComplex)> {
    let mut out: Vec<(String, SimplicialComplex)> = (0..5)
        .map(|i| (format!("random-{i}"), standard::random(rng, 6 + i, 8 + 2 * i, 3)))
        .collect();
    out.push(("S1".into(), standard::sphere(1)));
    out.push(("S2".into(), standard::octahedron()));
    out.push(("RP2".into(), standard::rp2()));
    out
}
