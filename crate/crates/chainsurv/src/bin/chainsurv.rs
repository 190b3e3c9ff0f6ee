fn main() {
    std::process::exit(chainsurv::run_cli());
}
