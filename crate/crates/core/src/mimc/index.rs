use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Lattice point with the entrywise partial order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        assert!(!entries.is_empty(), "multi-index needs at least one dimension");
        Self(entries)
    }

    pub fn zero(d: usize) -> Self {
        Self::new(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm1(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    /// Entrywise <=.
    pub fn le(&self, other: &Self) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn lt(&self, other: &Self) -> bool {
        self.le(other) && self != other
    }

    pub fn meet(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| *a.min(b)).collect())
    }

    pub fn join(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| *a.max(b)).collect())
    }

    /// All nu >= 0 with 0 < self - nu <= 1, in lexicographic order.
    pub fn backward_box(&self) -> Vec<MultiIndex> {
        let d = self.dim();
        let mut out: Vec<MultiIndex> = (1u32..(1 << d))
            .filter(|mask| (0..d).all(|i| mask & (1 << i) == 0 || self.0[i] > 0))
            .map(|mask| Self((0..d).map(|i| self.0[i] - ((mask >> i) & 1) as usize).collect()))
            .collect();
        out.sort();
        out
    }

    /// All nu <= top with 0 < nu - self <= 1, in lexicographic order.
    pub fn forward_box(&self, top: &MultiIndex) -> Vec<MultiIndex> {
        let d = self.dim();
        let mut out: Vec<MultiIndex> = (1u32..(1 << d))
            .filter(|mask| (0..d).all(|i| mask & (1 << i) == 0 || self.0[i] < top.0[i]))
            .map(|mask| Self((0..d).map(|i| self.0[i] + ((mask >> i) & 1) as usize).collect()))
            .collect();
        out.sort();
        out
    }

    /// The box {nu : 0 <= nu <= self} in lexicographic order.
    pub fn lower_set(&self) -> Vec<MultiIndex> {
        let mut out = vec![Self::zero(self.dim())];
        for (i, &top) in self.0.iter().enumerate() {
            out = out
                .into_iter()
                .flat_map(|m| {
                    (0..=top).map(move |k| {
                        let mut e = m.0.clone();
                        e[i] = k;
                        MultiIndex(e)
                    })
                })
                .collect();
        }
        out.sort();
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for MultiIndex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let entries = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad multi-index '{s}': {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        if entries.is_empty() {
            return Err("empty multi-index".into());
        }
        Ok(Self(entries))
    }
}

impl From<MultiIndex> for String {
    fn from(m: MultiIndex) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for MultiIndex {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Unweighted difference coefficient (-1)^{1+|lambda-nu|}.
pub fn epsilon_sign(lambda: &MultiIndex, nu: &MultiIndex) -> i32 {
    let diff: usize = lambda.0.iter().zip(&nu.0).map(|(a, b)| a - b).sum();
    if diff % 2 == 1 {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn backward_box_examples() {
        assert_eq!(mi(&[1, 1]).backward_box(), vec![mi(&[0, 0]), mi(&[0, 1]), mi(&[1, 0])]);
        assert!(mi(&[0, 0]).backward_box().is_empty());
        assert_eq!(mi(&[2, 0]).backward_box(), vec![mi(&[1, 0])]);
        assert_eq!(mi(&[2, 3, 1]).backward_box().len(), 7);
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_sign(&mi(&[1, 1]), &mi(&[0, 1])), 1);
        assert_eq!(epsilon_sign(&mi(&[1, 1]), &mi(&[0, 0])), -1);
        assert_eq!(epsilon_sign(&mi(&[1]), &mi(&[0])), 1);
    }

    #[test]
    fn order_and_lattice_ops() {
        let a = mi(&[1, 3]);
        let b = mi(&[2, 0]);
        assert!(!a.le(&b) && !b.le(&a));
        assert_eq!(a.meet(&b), mi(&[1, 0]));
        assert_eq!(a.join(&b), mi(&[2, 3]));
        assert_eq!(a.norm1(), 4);
        let lower = mi(&[1, 2]).lower_set();
        assert_eq!(lower.len(), 6);
        assert!(lower.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(mi(&[0, 1]).forward_box(&mi(&[2, 1])), vec![mi(&[1, 1])]);
    }

    #[test]
    fn string_round_trip() {
        let a = mi(&[3, 0, 12]);
        assert_eq!(a.to_string(), "3,0,12");
        assert_eq!("3,0,12".parse::<MultiIndex>().unwrap(), a);
        assert!("3,x".parse::<MultiIndex>().is_err());
        assert_eq!(serde_json::to_string(&a).unwrap(), "\"3,0,12\"");
    }
}
