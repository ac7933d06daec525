fn main() {
    std::process::exit(rhotic_mdx::cli::run(std::env::args_os()));
}
