fn main() {
    let code = ordinal_zero::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
