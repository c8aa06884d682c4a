//! Binary entry point; all behaviour lives in [`bvmaster::cli`].

fn main() {
    std::process::exit(bvmaster::cli::run());
}
