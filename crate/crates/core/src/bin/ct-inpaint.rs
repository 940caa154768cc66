fn main() {
    std::process::exit(ct_inpaint::cli::run(std::env::args_os()));
}
