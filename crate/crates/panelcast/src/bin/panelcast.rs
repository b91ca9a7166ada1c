fn main() {
    std::process::exit(panelcast::app::cli_dispatch(std::env::args_os()));
}
