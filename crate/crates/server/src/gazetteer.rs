//! Local place-name lookup used by the search box.

use serde::Serialize;

pub const MAX_RESULTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Place {
    pub name: String,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    /// `(lowercased name, place)`, sorted by lowercased name.
    entries: Vec<(String, Place)>,
}

impl Gazetteer {
    pub fn new(places: impl IntoIterator<Item = Place>) -> Self {
        let mut entries: Vec<(String, Place)> = places
            .into_iter()
            .filter(|p| !p.name.trim().is_empty())
            .map(|p| (p.name.to_lowercase(), p))
            .collect();
        entries.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then_with(|| a.1.name.cmp(&b.1.name))
                .then_with(|| a.1.lon.total_cmp(&b.1.lon))
                .then_with(|| a.1.lat.total_cmp(&b.1.lat))
        });
        entries.dedup_by(|a, b| a.1 == b.1);
        Gazetteer { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact matches first, then prefix matches, then substring matches;
    /// alphabetical within each rank. `None` for a blank query.
    pub fn search(&self, query: &str) -> Option<Vec<Place>> {
        let q = query.trim().to_lowercase();
        if q.is_empty() {
            return None;
        }
        let mut hits: Vec<(u8, usize)> = self
            .entries
            .iter()
            .enumerate()
            .filter_map(|(i, (name, _))| {
                let rank = if *name == q {
                    0
                } else if name.starts_with(&q) {
                    1
                } else if name.contains(&q) {
                    2
                } else {
                    return None;
                };
                Some((rank, i))
            })
            .collect();
        hits.sort_unstable();
        Some(
            hits.into_iter()
                .take(MAX_RESULTS)
                .map(|(_, i)| self.entries[i].1.clone())
                .collect(),
        )
    }
}
