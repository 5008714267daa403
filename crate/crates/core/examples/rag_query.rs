//! Indexes a directory of notes and prints the best parents for a query,
//! with the child chunk that matched.
//!
//! cargo run -p dccflow --example rag_query -- docs "bound parameter relink"

use std::path::{Path, PathBuf};

use dccflow::rag::{ingest_paths, ChunkConfig, MockEmbedder};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "docs".into()));
    let query = args.next().unwrap_or_else(|| "bound parameter relink".into());

    let config = ChunkConfig::new(600, 160).expect("valid limits");
    let index = match ingest_paths(Path::new("."), std::slice::from_ref(&dir), config, &MockEmbedder) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    let s = index.stats();
    println!("{}: {} documents, {} parents, {} children", dir.display(), s.documents, s.parents, s.children);
    println!("query: {query}\n");

    for hit in index.query(&query, 3, &MockEmbedder) {
        let child = index.children().iter().find(|c| c.id == hit.best_child_id).expect("hit names a child");
        println!("{:.3}  {}", hit.score, hit.parent.id);
        println!("       matched: {}", child.text.replace('\n', " "));
        let preview: String = hit.parent.text.chars().take(160).collect();
        println!("       parent:  {}...\n", preview.replace('\n', " "));
    }
}
