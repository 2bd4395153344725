fn main() {
    // System BLAS/LAPACK. Debian's libopenblas carries the full LAPACK API.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
