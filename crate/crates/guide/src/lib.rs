//! The shellrig guide, embedded so `cargo test --doc` compiles and runs
//! every Rust snippet in the book. Chapters live in `book/src/`.
