use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

/// Network dimensions: cells, devices per cell, subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub cells: usize,
    pub devices: usize,
    pub subcarriers: usize,
}

impl Dims {
    pub fn new(cells: usize, devices: usize, subcarriers: usize) -> Self {
        Self {
            cells,
            devices,
            subcarriers,
        }
    }

    pub fn len(&self) -> usize {
        self.cells * self.devices * self.subcarriers
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, k: usize, u: usize, s: usize) -> usize {
        debug_assert!(k < self.cells && u < self.devices && s < self.subcarriers);
        (k * self.devices + u) * self.subcarriers + s
    }

    /// Iterates `(k, u, s)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let d = *self;
        (0..d.cells).flat_map(move |k| {
            (0..d.devices).flat_map(move |u| (0..d.subcarriers).map(move |s| (k, u, s)))
        })
    }
}

/// Dense per-(cell, device, subcarrier) storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid3<T> {
    dims: Dims,
    data: Vec<T>,
}

impl<T: Clone> Grid3<T> {
    pub fn filled(dims: Dims, value: T) -> Self {
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }
}

impl<T> Grid3<T> {
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let data = dims.iter().map(|(k, u, s)| f(k, u, s)).collect();
        Self { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, k: usize, u: usize, s: usize) -> &T {
        &self.data[self.dims.index(k, u, s)]
    }

    pub fn get_mut(&mut self, k: usize, u: usize, s: usize) -> &mut T {
        let i = self.dims.index(k, u, s);
        &mut self.data[i]
    }

    /// Contiguous `U × S` block of cell `k`, device-major.
    pub fn cell(&self, k: usize) -> &[T] {
        let n = self.dims.devices * self.dims.subcarriers;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn cell_mut(&mut self, k: usize) -> &mut [T] {
        let n = self.dims.devices * self.dims.subcarriers;
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize), &T)> + '_ {
        self.dims.iter().zip(self.data.iter())
    }

    pub fn map<V>(&self, f: impl Fn(&T) -> V) -> Grid3<V> {
        Grid3 {
            dims: self.dims,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> Index<(usize, usize, usize)> for Grid3<T> {
    type Output = T;
    fn index(&self, (k, u, s): (usize, usize, usize)) -> &T {
        self.get(k, u, s)
    }
}

impl<T> IndexMut<(usize, usize, usize)> for Grid3<T> {
    fn index_mut(&mut self, (k, u, s): (usize, usize, usize)) -> &mut T {
        self.get_mut(k, u, s)
    }
}
