//! Spatial, regional and national averages as lagged regressors.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::panel::PanelDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpec {
    /// `adjacency[i][k]` is `v_ik`; the diagonal is ignored.
    pub adjacency: Vec<Vec<bool>>,
    /// Region label per unit.
    pub region_map: Vec<String>,
    pub include_country_avg: bool,
}

impl SpatialSpec {
    /// Builds the indicator matrix from unordered neighbour pairs keyed by
    /// unit label, in the order of `units`.
    pub fn from_edges(
        units: &[String],
        edges: &[(String, String)],
        regions: &BTreeMap<String, String>,
        include_country_avg: bool,
    ) -> Result<Self> {
        let index: BTreeMap<&str, usize> = units.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
        let n = units.len();
        let mut adjacency = vec![vec![false; n]; n];
        for (a, b) in edges {
            // Pairs naming units outside the panel are ignored.
            if let (Some(&i), Some(&k)) = (index.get(a.as_str()), index.get(b.as_str())) {
                adjacency[i][k] = true;
                adjacency[k][i] = true;
            }
        }
        let missing: Vec<&str> = units
            .iter()
            .filter(|u| !regions.contains_key(*u))
            .map(|u| u.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("region map lacks units {}", missing.join(", "))));
        }
        let region_map = units.iter().map(|u| regions[u].clone()).collect();
        Ok(Self {
            adjacency,
            region_map,
            include_country_avg,
        })
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.adjacency.len() != n || self.adjacency.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!("adjacency must be {n} x {n}")));
        }
        if self.region_map.len() != n {
            return Err(Error::Config(format!(
                "region map covers {} of {n} units",
                self.region_map.len()
            )));
        }
        Ok(())
    }

    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        (0..self.adjacency.len())
            .filter(|&k| k != i && self.adjacency[i][k])
            .collect()
    }

    /// Row-normalized weights `v_ik / sum_k v_ik`; `None` for isolated units.
    pub fn weights(&self, i: usize) -> Option<Vec<(usize, f64)>> {
        let nb = self.neighbours(i);
        if nb.is_empty() {
            return None;
        }
        let w = 1.0 / nb.len() as f64;
        Some(nb.into_iter().map(|k| (k, w)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPanel {
    /// Original regressors followed by `y*_{t-1}`, the region average and,
    /// if requested, the country average, all dated `t-1`. One period shorter
    /// than the input.
    pub data: PanelDataset,
    /// Input unit indices kept, in output order.
    pub kept: Vec<usize>,
    /// Labels of units dropped for having no neighbours.
    pub dropped: Vec<String>,
}

/// Appends lagged spatial regressors. Units without neighbours are dropped;
/// region and country averages are taken over the retained units and
/// include unit `i` itself.
pub fn build_spatial_regressors(panel: &PanelDataset, spec: &SpatialSpec) -> Result<SpatialPanel> {
    let n = panel.n_units();
    spec.check(n)?;
    if panel.n_periods() < 2 {
        return Err(Error::InvalidPanel("spatial lags need at least two periods".into()));
    }
    let kept: Vec<usize> = (0..n).filter(|&i| !spec.neighbours(i).is_empty()).collect();
    let dropped: Vec<String> = (0..n)
        .filter(|i| !kept.contains(i))
        .map(|i| panel.unit_label(i))
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidPanel("no unit has a neighbour".into()));
    }
    let t_in = panel.n_periods();

    let y_star: Vec<Vec<f64>> = (0..n)
        .map(|i| match spec.weights(i) {
            Some(w) => (0..t_in)
                .map(|t| w.iter().map(|&(k, wk)| wk * panel.y_at(k, t)).sum())
                .collect(),
            None => vec![f64::NAN; t_in],
        })
        .collect();

    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in &kept {
        members.entry(spec.region_map[i].as_str()).or_default().push(i);
    }
    let average = |units: &[usize], t: usize| -> f64 {
        units.iter().map(|&k| panel.y_at(k, t)).sum::<f64>() / units.len() as f64
    };
    let country: Vec<f64> = (0..t_in).map(|t| average(&kept, t)).collect();

    let k_old = panel.k_regressors();
    let k_new = k_old + 2 + usize::from(spec.include_country_avg);
    let data = PanelDataset::from_fn(
        kept.len(),
        t_in - 1,
        k_new,
        |i, t| panel.y_at(kept[i], t + 1),
        |i, t, j| {
            let u = kept[i];
            match j {
                j if j < k_old => panel.x_at(u, t + 1)[j],
                j if j == k_old => y_star[u][t],
                j if j == k_old + 1 => average(&members[spec.region_map[u].as_str()], t),
                _ => country[t],
            }
        },
    )?;
    let labels = kept.iter().map(|&i| panel.unit_label(i)).collect();
    let periods = panel.period_labels().map(|p| p[1..].to_vec());
    Ok(SpatialPanel {
        data: data.with_labels(Some(labels), periods)?,
        kept,
        dropped,
    })
}
