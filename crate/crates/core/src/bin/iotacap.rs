use std::error::Error;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use iotacap::abe::{
    keygen, peek_key_file, setup, AttributeSet, Bls12, KeyKind, MasterKey, PairingGroup,
    PublicParams, SecretKey,
};
use iotacap::config::Config;
use iotacap::harness::{
    bench_attributes, bench_one_to_many, bench_policies, replay_report, write_json_lines,
    BenchOptions, BenchReport, BENCH_DIFFICULTY, PROTOTYPE_MEANS,
};
use iotacap::mam::ChannelRegistry;
use iotacap::owner::{serve, Owner, OwnerConfig, SystemClock, Update};
use iotacap::subject::{load_token, HttpTransport, SubjectState};
use iotacap::tangle::{PowConfig, TangleStore};
use iotacap::token::Right;

type Backend = Bls12;
type CliResult<T = ()> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "iotacap",
    version,
    about = "Attribute-encrypted capability tokens on a simulated tangle"
)]
struct Cli {
    /// Configuration file.
    #[arg(long, global = true, default_value = "iotacap.toml")]
    config: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Attribute authority: public parameters and attribute keys.
    #[command(subcommand)]
    Authority(AuthorityCmd),
    /// Object owner: grant, update, serve.
    #[command(subcommand)]
    Owner(OwnerCmd),
    /// Subject client.
    #[command(subcommand)]
    Subject(SubjectCmd),
    /// Benchmarks; reports are JSON lines.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Subcommand)]
enum AuthorityCmd {
    /// Writes fresh public parameters and master key.
    Setup {
        #[arg(long)]
        force: bool,
    },
    /// Issues a secret key for a comma-separated attribute list.
    Keygen {
        #[arg(long)]
        attrs: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum OwnerCmd {
    /// Publishes the first token for a policy.
    Grant {
        #[arg(long)]
        policy: String,
        /// `resource:ACTION[,ACTION...]`, repeatable.
        #[arg(long = "right", required = true)]
        rights: Vec<String>,
    },
    /// Publishes a replacement token for an existing policy.
    Update {
        #[arg(long)]
        policy: String,
        #[arg(
            long = "right",
            conflicts_with = "inactive",
            required_unless_present = "inactive"
        )]
        rights: Vec<String>,
        #[arg(long)]
        inactive: bool,
    },
    /// Serves the authentication and access endpoints.
    Serve,
}

#[derive(Subcommand)]
enum SubjectCmd {
    /// Key management.
    #[command(subcommand)]
    Keys(KeysCmd),
    /// Fetches and decrypts the latest token on a channel.
    Fetch {
        #[arg(long)]
        root: String,
    },
    /// Runs the two-phase access protocol with a stored token.
    Request {
        #[arg(long)]
        token: PathBuf,
        #[arg(long)]
        resource: String,
        #[arg(long)]
        action: String,
    },
}

#[derive(Subcommand)]
enum KeysCmd {
    /// Installs a secret key file as this subject's key.
    Import { file: PathBuf },
}

#[derive(Args, Clone)]
struct BenchArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[arg(long, default_value_t = BENCH_DIFFICULTY)]
    difficulty: u32,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Token and request sizes as the policy grows
    Attributes {
        #[command(flatten)]
        common: BenchArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [3usize, 6, 9, 12])]
        levels: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
    },
    /// Authorizes many subjects under both schemes and counts operations
    OneToMany {
        #[command(flatten)]
        common: BenchArgs,
        #[arg(long, default_value_t = 1000)]
        students: u64,
        #[arg(long, default_value_t = 200)]
        staff: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Per-subject cost as the number of policies grows
    Policies {
        #[command(flatten)]
        common: BenchArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 10, 100])]
        levels: Vec<usize>,
    },
    /// Totals from the per-operation cost model
    Replay {
        #[command(flatten)]
        common: BenchArgs,
        #[arg(long, default_value_t = 1000)]
        students: u64,
        #[arg(long, default_value_t = 200)]
        staff: u64,
    },
}

fn write_file(path: &Path, bytes: &[u8], force: bool) -> CliResult {
    if !force && path.exists() {
        return Err(format!("{} exists; pass --force to overwrite", path.display()).into());
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_params(cfg: &Config) -> CliResult<PublicParams<Backend>> {
    Ok(PublicParams::from_bytes(&read(&cfg.abe.params_path)?)?)
}

fn load_secret(path: &Path) -> CliResult<SecretKey<Backend>> {
    Ok(SecretKey::from_bytes(&read(path)?)?)
}

fn parse_rights(specs: &[String]) -> CliResult<Vec<Right>> {
    specs
        .iter()
        .map(|s| Right::parse_spec(s).map_err(Into::into))
        .collect()
}

fn open_owner(cfg: &Config) -> CliResult<Owner<Backend>> {
    let mut ocfg = OwnerConfig::new(cfg.owner.issuer.clone(), cfg.owner_seed()?);
    ocfg.otp_ttl_s = cfg.owner.otp_ttl_s;
    ocfg.registry_path = Some(cfg.owner.registry_path.clone());
    let store = Arc::new(TangleStore::new(cfg.tangle_config())?);
    let owner = Owner::new(
        ocfg,
        load_params(cfg)?,
        load_secret(&cfg.owner.key_path)?,
        store,
        Arc::new(SystemClock),
    )?;
    let n = owner.restore()?;
    log::info!("restored {n} policies");
    Ok(owner)
}

fn authority(cfg: &Config, cmd: AuthorityCmd) -> CliResult {
    match cmd {
        AuthorityCmd::Setup { force } => {
            let (pp, mk) = setup::<Backend, _>(&mut ChaCha20Rng::from_entropy());
            write_file(&cfg.abe.params_path, &pp.to_bytes(), force)?;
            write_file(&cfg.abe.master_path, &mk.to_bytes(), force)?;
            println!("{}", cfg.abe.params_path.display());
        }
        AuthorityCmd::Keygen { attrs, out } => {
            let mk = MasterKey::<Backend>::from_bytes(&read(&cfg.abe.master_path)?)?;
            let sk = keygen(
                &mk,
                &AttributeSet::parse_list(&attrs)?,
                &mut ChaCha20Rng::from_entropy(),
            )?;
            write_file(&out, &sk.to_bytes(), false)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn owner(cfg: &Config, cmd: OwnerCmd) -> CliResult {
    let owner = open_owner(cfg)?;
    match cmd {
        OwnerCmd::Grant { policy, rights } => {
            let root = owner.grant_access(&policy, parse_rights(&rights)?)?;
            println!("{root}");
        }
        OwnerCmd::Update {
            policy,
            rights,
            inactive,
        } => {
            let update = if inactive {
                Update::Inactive
            } else {
                Update::Rights(parse_rights(&rights)?)
            };
            println!("{}", owner.update_access(&policy, update)?);
        }
        OwnerCmd::Serve => {
            let handle = serve(Arc::new(owner), &cfg.owner.listen_addr, cfg.owner.workers)?;
            eprintln!("listening on {}", handle.endpoint());
            handle.join();
        }
    }
    Ok(())
}

fn subject(cfg: &Config, cmd: SubjectCmd) -> CliResult<ExitCode> {
    if let SubjectCmd::Keys(KeysCmd::Import { file }) = &cmd {
        let bytes = read(file)?;
        let (kind, backend) = peek_key_file(&bytes)?;
        if kind != KeyKind::SecretKey || backend != Backend::ID {
            return Err(format!("{} is not a {} secret key", file.display(), Backend::NAME).into());
        }
        let key = SecretKey::<Backend>::from_bytes(&bytes)?;
        write_file(&cfg.subject.key_path, &bytes, true)?;
        let attrs: Vec<String> = key.attributes().iter().map(|a| a.canonical()).collect();
        println!("imported key for {}", attrs.join(", "));
        return Ok(ExitCode::SUCCESS);
    }
    let state = SubjectState::new(
        load_secret(&cfg.subject.key_path)?,
        load_params(cfg)?,
        ChannelRegistry::load(&cfg.subject.registry_path)?,
        Arc::new(HttpTransport::new(cfg.subject.owner_endpoint.clone())),
    )
    .with_token_dir(cfg.subject.token_dir.clone());
    match cmd {
        SubjectCmd::Keys(_) => unreachable!("handled above"),
        SubjectCmd::Fetch { root } => {
            let store = TangleStore::new(cfg.tangle_config())?;
            let token = state.fetch_token(&root.parse()?, &store)?;
            let file = cfg
                .subject
                .token_dir
                .join(iotacap::subject::token_file_name(&token.policy));
            println!("{}", file.display());
            println!("{}", String::from_utf8(token.to_canonical_bytes()?)?);
            Ok(ExitCode::SUCCESS)
        }
        SubjectCmd::Request {
            token,
            resource,
            action,
        } => {
            let token = load_token(&token)?;
            let decision = state.request_access(&token, &resource, &action)?;
            match decision.payload() {
                Some(p) if decision.is_grant() => {
                    println!("GRANT");
                    io::stdout().write_all(p)?;
                    println!();
                    Ok(ExitCode::SUCCESS)
                }
                _ => {
                    println!("DENY {}", decision.reason());
                    Ok(ExitCode::from(3))
                }
            }
        }
    }
}

fn bench(cmd: BenchCmd) -> CliResult {
    let opts = |c: &BenchArgs, threads: usize| BenchOptions {
        seed: c.seed,
        pow: PowConfig {
            difficulty: c.difficulty,
            ..PowConfig::default()
        },
        threads,
    };
    let (common, reports): (BenchArgs, Vec<BenchReport>) = match cmd {
        BenchCmd::Attributes {
            common,
            levels,
            reps,
        } => {
            let r = bench_attributes::<Backend>(&levels, reps, &opts(&common, 1));
            (common, r)
        }
        BenchCmd::OneToMany {
            common,
            students,
            staff,
            threads,
        } => {
            let (p, d) = bench_one_to_many::<Backend>(students, staff, &opts(&common, threads));
            (common, vec![p, d])
        }
        BenchCmd::Policies { common, levels } => {
            let r = bench_policies::<Backend>(&levels, &opts(&common, 1));
            (common, r)
        }
        BenchCmd::Replay {
            common,
            students,
            staff,
        } => {
            let r = replay_report(&PROTOTYPE_MEANS, students, staff)?;
            (common, vec![r])
        }
    };
    if common.out.as_os_str() == "-" {
        write_json_lines(&reports, io::stdout().lock())?;
    } else {
        write_json_lines(&reports, fs::File::create(&common.out)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    let cfg = Config::load(&cli.config)?;
    match cli.cmd {
        Cmd::Authority(c) => authority(&cfg, c)?,
        Cmd::Owner(c) => owner(&cfg, c)?,
        Cmd::Subject(c) => return subject(&cfg, c),
        Cmd::Bench(c) => bench(c)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
