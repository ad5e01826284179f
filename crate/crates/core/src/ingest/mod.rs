//! Readers for external graph sources and molecular scaffold extraction.

pub mod graph_file;
pub mod scaffold;
pub mod smiles;

pub use graph_file::{
    join_labels, parse_edge_list, parse_graph_file, read_graph_file, read_label_csv,
    write_graph_file, GraphRecord, IngestError,
};
pub use scaffold::{
    are_isomorphic, canonical_key, group_scaffolds, murcko_scaffold, Scaffold, ScaffoldGrouping,
    ScaffoldGroups,
};
pub use smiles::{parse_smiles, smiles_to_graph, to_graph, BondOrder, SmilesError, SmilesMolecule};
