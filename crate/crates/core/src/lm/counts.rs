use std::collections::HashMap;

use super::{BOS, EOS};

/// Raw n-gram counts for orders 1..=n, keyed by interned unit ids.
///
/// Tables built on different shards merge by addition.
#[derive(Debug, Clone)]
pub struct NgramCounts {
    order: usize,
    units: Vec<String>,
    ids: HashMap<String, u32>,
    tables: Vec<HashMap<Vec<u32>, u64>>,
}

impl NgramCounts {
    pub fn new(order: usize) -> Self {
        let mut c = NgramCounts {
            order,
            units: Vec::new(),
            ids: HashMap::new(),
            tables: vec![HashMap::new(); order],
        };
        c.intern(BOS);
        c.intern(EOS);
        c
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn table(&self, k: usize) -> &HashMap<Vec<u32>, u64> {
        &self.tables[k - 1]
    }

    pub fn id_of(&self, unit: &str) -> Option<u32> {
        self.ids.get(unit).copied()
    }

    pub fn intern(&mut self, unit: &str) -> u32 {
        if let Some(&id) = self.ids.get(unit) {
            return id;
        }
        let id = self.units.len() as u32;
        self.units.push(unit.to_string());
        self.ids.insert(unit.to_string(), id);
        id
    }

    pub fn is_empty(&self) -> bool {
        self.tables[0].is_empty()
    }

    /// Counts every n-gram ending at a predicted position of one sequence.
    /// Sequences get boundary markers when the order is at least 2.
    pub fn add_sequence<S: AsRef<str>>(&mut self, units: &[S]) {
        if units.is_empty() {
            return;
        }
        let mut seq: Vec<u32> = Vec::with_capacity(units.len() + 2);
        let marked = self.order >= 2;
        if marked {
            seq.push(self.ids[BOS]);
        }
        for u in units {
            let id = self.intern(u.as_ref());
            seq.push(id);
        }
        if marked {
            seq.push(self.ids[EOS]);
        }
        let first = usize::from(marked);
        for i in first..seq.len() {
            for k in 1..=self.order.min(i + 1) {
                let gram = &seq[i + 1 - k..=i];
                *self.tables[k - 1].entry(gram.to_vec()).or_insert(0) += 1;
            }
        }
    }

    /// Adds another table's counts into this one.
    pub fn merge(&mut self, other: NgramCounts) {
        assert_eq!(self.order, other.order, "cannot merge counts of different orders");
        let remap: Vec<u32> = other.units.iter().map(|u| self.intern(u)).collect();
        for (k, table) in other.tables.into_iter().enumerate() {
            for (gram, c) in table {
                let key: Vec<u32> = gram.iter().map(|&i| remap[i as usize]).collect();
                *self.tables[k].entry(key).or_insert(0) += c;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(lines: &[&[&str]], order: usize) -> NgramCounts {
        let mut c = NgramCounts::new(order);
        for l in lines {
            c.add_sequence(l);
        }
        c
    }

    fn get(c: &NgramCounts, gram: &[&str]) -> u64 {
        let key: Vec<u32> = gram.iter().map(|u| c.id_of(u).unwrap()).collect();
        c.table(gram.len()).get(&key).copied().unwrap_or(0)
    }

    #[test]
    fn bigram_counts_include_markers() {
        let c = count(&[&["a", "b"], &["a", "b"], &["b", "a"]], 2);
        assert_eq!(get(&c, &["<s>", "a"]), 2);
        assert_eq!(get(&c, &["a", "b"]), 2);
        assert_eq!(get(&c, &["b", "</s>"]), 2);
        assert_eq!(get(&c, &["a", "</s>"]), 1);
        assert_eq!(get(&c, &["</s>"]), 3);
        assert_eq!(c.table(1).len(), 3);
    }

    #[test]
    fn merging_equals_counting_together() {
        let all = count(&[&["x", "y", "z"], &["z", "y"]], 3);
        let mut a = count(&[&["z", "y"]], 3);
        a.merge(count(&[&["x", "y", "z"]], 3));
        for k in 1..=3 {
            let norm = |c: &NgramCounts| {
                let mut v: Vec<(Vec<String>, u64)> = c
                    .table(k)
                    .iter()
                    .map(|(g, n)| (g.iter().map(|&i| c.units()[i as usize].clone()).collect(), *n))
                    .collect();
                v.sort();
                v
            };
            assert_eq!(norm(&a), norm(&all));
        }
    }
}
