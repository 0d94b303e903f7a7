fn main() {
    std::process::exit(hcl_core::cli::run());
}
