fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("manifest dir");
    let header = std::path::Path::new(&crate_dir).join("include/xgrove.h");
    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            std::fs::create_dir_all(header.parent().unwrap()).expect("include dir");
            bindings.write_to_file(&header);
        }
        // Keep the committed header when generation is impossible.
        Err(e) => println!("cargo:warning=cbindgen skipped: {e}"),
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
