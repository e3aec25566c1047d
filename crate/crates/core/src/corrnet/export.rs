//! Edge-list and node-attribute CSVs for external layout and plotting tools.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{Edge, NodeStats, StockGraph};
use crate::error::{Error, Result};
use crate::market_data::UNKNOWN_SECTOR;
use crate::scalar::Real;

/// `source,target,weight` with ticker names.
pub fn write_edge_list<T: Real, W: Write>(g: &StockGraph<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source", "target", "weight"])?;
    for e in g.edges() {
        w.write_record([
            g.nodes()[e.source].as_str(),
            g.nodes()[e.target].as_str(),
            &format!("{:e}", e.weight),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `ticker,degree,eigencentrality,pagerank,clustering,community,sector`, in
/// graph node order.
pub fn write_node_attributes<T: Real, W: Write>(
    g: &StockGraph<T>,
    stats: &BTreeMap<String, NodeStats<T>>,
    sectors: &BTreeMap<String, String>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "ticker",
        "degree",
        "eigencentrality",
        "pagerank",
        "clustering",
        "community",
        "sector",
    ])?;
    for t in g.nodes() {
        let s = stats.get(t).ok_or_else(|| Error::MissingNode(t.clone()))?;
        w.write_record([
            t.clone(),
            s.degree.to_string(),
            format!("{:e}", s.eigencentrality),
            format!("{:e}", s.pagerank),
            format!("{:e}", s.clustering),
            s.community.to_string(),
            sectors.get(t).cloned().unwrap_or_else(|| UNKNOWN_SECTOR.into()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds a graph from an edge list; node order follows `node_order` when
/// given (e.g. the `ticker` column of a node file), otherwise first appearance.
pub fn read_edge_list<T: Real, R: Read>(
    reader: R,
    node_order: Option<&[String]>,
    rho_c: T,
) -> Result<StockGraph<T>> {
    let mut nodes: Vec<String> = node_order.map(<[String]>::to_vec).unwrap_or_default();
    let mut index: BTreeMap<String, usize> =
        nodes.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    let mut rdr = csv::Reader::from_reader(reader);
    let mut edges = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        if rec.len() != 3 {
            return Err(Error::Format {
                row,
                column: rec.len(),
                message: "edge rows need source,target,weight".into(),
            });
        }
        let mut id = |name: &str| -> usize {
            if let Some(&i) = index.get(name) {
                return i;
            }
            nodes.push(name.to_string());
            index.insert(name.to_string(), nodes.len() - 1);
            nodes.len() - 1
        };
        let source = id(rec[0].trim());
        let target = id(rec[1].trim());
        let weight: f64 = rec[2].trim().parse().map_err(|_| Error::Format {
            row,
            column: 3,
            message: format!("invalid weight `{}`", &rec[2]),
        })?;
        edges.push(Edge {
            source,
            target,
            weight: T::lit(weight),
        });
    }
    StockGraph::new(nodes, edges, rho_c)
}

/// Reads the ticker column of a node-attribute file.
pub fn read_node_tickers<R: Read>(reader: R) -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.records()
        .map(|r| Ok(r?.get(0).unwrap_or_default().trim().to_string()))
        .collect()
}

/// Histogram of integer values: `value,count`.
pub fn write_int_histogram<W: Write>(values: &[usize], writer: W) -> Result<()> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_insert(0) += 1;
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["value", "count"])?;
    for (v, c) in counts {
        w.write_record([v.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
