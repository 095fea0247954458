fn main() {
    std::process::exit(cellgeom::cli::main());
}
