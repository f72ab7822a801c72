//! Writes the default configuration, edits it as text, and reads it back.

use dyncontract::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = Config::default().to_toml();
    let edited = text.replace("beta = 0.5\n", "beta = 0.9\n");
    let cfg = Config::from_toml(&edited)?;
    println!("market discount now {}", cfg.market.beta);

    let broken = text.replace("p1 = [0.5, 0.5]", "p1 = [0.5, 0.7]");
    match Config::from_toml(&broken) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
