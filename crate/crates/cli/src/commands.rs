use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use alo_core::codegen::{emit_scene, emit_update_script, script_file_name, Dialect};
use alo_core::gateway::{ChatBackend, ChatRequest, MAX_TEMPERATURE};
use alo_core::model::{LoadIssueKind, Registry};
use alo_core::prompt::{
    classify_parameters, pair_name, system_prompt, Lexicon, ParameterLabel, SystemVariant, TemplateSet,
};
use alo_core::script::{parse_canonical, repair, serialize};
use alo_core::sim::{Bounds, EntitySpec, InteractionRule, Scenario};
use alo_core::variability::{analyze, temperature_label, AnalyzeConfig, TrialOptions};
use alo_core::Alo;

use crate::config::{BackendChoice, Settings};
use crate::{transcript, CliError, Command};

/// Gap between neighbours in the default layout. Smaller than the default
/// trigger radius, so paired entities start out interacting.
const DEFAULT_SPACING: f64 = 8.0;

pub const BUNDLE_FILE: &str = "scene.bundle.json";

/// Requests per `create`/`interact` before an unusable response is an
/// error. Each retry advances the seed by one.
pub const CREATE_ATTEMPTS: u64 = 3;

/// State shared by successive commands (one per process, or many in the
/// REPL).
#[derive(Debug)]
pub struct Session {
    pub settings: Settings,
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(CliError::from)?
    };
}

impl Session {
    pub fn new(settings: Settings) -> Self {
        Self { settings }
    }

    pub fn execute(&mut self, command: Command, out: &mut dyn Write) -> Result<(), CliError> {
        match command {
            Command::Create { name, force } => self.create(&name, force, out),
            Command::Interact { a, b, context, force } => self.interact(&a, &b, context.as_deref(), force, out),
            Command::Simulate { args } => {
                let (scenario, ticks) = simulate_args(&args)?;
                self.simulate(scenario.as_deref(), ticks, out)
            }
            Command::Export { scenario } => self.export(scenario.as_deref(), out),
            Command::Analyze { run_config, n, temperatures, prompt, system_prompt } => {
                let mut cfg = match run_config {
                    Some(path) => read_json::<AnalyzeConfig>(&path).map_err(|e| CliError::usage(e.to_string()))?,
                    None => AnalyzeConfig::default(),
                };
                if let Some(n) = n {
                    cfg.n = n;
                }
                if let Some(t) = temperatures {
                    cfg.temperatures = t;
                }
                if let Some(p) = prompt {
                    cfg.user_prompt = p;
                }
                if let Some(v) = system_prompt {
                    cfg.system_prompt_variant = v;
                }
                self.analyze(cfg, out)
            }
            Command::ImagePrompt { name, suffix } => self.image_prompt(&name, &suffix, out),
            Command::Repl => Err(CliError::usage("already in the REPL")),
        }
    }

    fn templates(&self) -> Result<TemplateSet, CliError> {
        match &self.settings.templates {
            Some(dir) => Ok(TemplateSet::load_dir(dir)?),
            None => Ok(TemplateSet::default()),
        }
    }

    /// Opens the registry directory, warning about entries that could not
    /// be loaded. A missing directory is an empty registry.
    pub fn open_registry(&self) -> Result<Registry, CliError> {
        let root = &self.settings.registry;
        if !root.exists() {
            return Ok(Registry::with_root(root));
        }
        let (registry, report) = Registry::load(root)?;
        for issue in &report.issues {
            let what = match &issue.kind {
                LoadIssueKind::CorruptEntry(m) => format!("skipped: {m}"),
                LoadIssueKind::Divergence(m) => format!("markdown differs from sidecar: {m}"),
                LoadIssueKind::BrokenReference(m) => format!("broken reference: {m}"),
            };
            eprintln!("warning: {}: {what}", issue.path.display());
        }
        Ok(registry)
    }

    /// Sends one request and records the round trip.
    fn complete(&self, command: &str, system: &str, user: &str, seed: u64) -> Result<String, CliError> {
        let backend = self.settings.backend(self.settings.backend)?;
        let mut req = ChatRequest::new(Some(system), user)
            .with_temperature(self.settings.gateway.temperature)
            .with_seed(seed);
        req.max_tokens = self.settings.gateway.max_tokens;
        let completion = backend.complete(&req)?;
        transcript::append(
            &self.settings.out,
            command,
            &backend.kind().to_string(),
            &req,
            &completion.content,
        )?;
        Ok(completion.content)
    }

    /// Asks for the ALO `expected` until a response repairs, parses and
    /// validates, at most [`CREATE_ATTEMPTS`] times. Backend failures are
    /// not retried here; the gateway has its own retry policy.
    fn request_alo(&self, command: &str, system: &str, user: &str, expected: &str) -> Result<Alo, CliError> {
        let mut attempt = 0;
        loop {
            let seed = self.settings.seed.wrapping_add(attempt);
            let response = self.complete(command, system, user, seed)?;
            match self.parse_response(&response, expected) {
                Ok(alo) => return Ok(alo),
                Err(e) if attempt + 1 < CREATE_ATTEMPTS => {
                    eprintln!("note: attempt {} of {CREATE_ATTEMPTS} unusable: {e}", attempt + 1);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Repairs and parses a response that should describe `expected`.
    fn parse_response(&self, response: &str, expected: &str) -> Result<Alo, CliError> {
        let repaired = repair(response);
        if !repaired.applied.is_empty() {
            let rules: Vec<String> = repaired.applied.iter().map(|r| r.to_string()).collect();
            eprintln!("note: repaired response ({})", rules.join(", "));
        }
        let alo = parse_canonical(&repaired.text)
            .map_err(|e| CliError::domain(format!("response for `{expected}` did not parse: {e}")))?;
        if alo.name != expected {
            return Err(CliError::domain(format!(
                "response describes `{}`, not `{expected}`",
                alo.name
            )));
        }
        Ok(alo)
    }

    fn store(&self, registry: &mut Registry, alo: Alo) -> Result<(), CliError> {
        registry.put(alo)?;
        registry.save()?;
        Ok(())
    }

    pub fn create(&self, name: &str, force: bool, out: &mut dyn Write) -> Result<(), CliError> {
        let name = name.trim();
        if name.is_empty() {
            return Err(CliError::usage("name must not be empty"));
        }
        let mut registry = self.open_registry()?;
        if registry.contains(name) && !force {
            return Err(CliError::domain(format!("`{name}` already exists; pass --force to replace it")));
        }
        let templates = self.templates()?;
        let prompt = templates.creation_prompt(name)?;
        let alo = self.request_alo("create", templates.system_prompt(SystemVariant::Markdown), &prompt, name)?;
        let text = serialize(&alo);
        self.store(&mut registry, alo)?;
        say!(out, "{}", text.trim_end());
        Ok(())
    }

    pub fn interact(
        &self,
        a: &str,
        b: &str,
        context: Option<&str>,
        force: bool,
        out: &mut dyn Write,
    ) -> Result<(), CliError> {
        let (a, b) = (a.trim(), b.trim());
        if a.is_empty() || b.is_empty() {
            return Err(CliError::usage("both names must be non-empty"));
        }
        let mut registry = self.open_registry()?;
        for name in [a, b] {
            if !registry.contains(name) {
                return Err(CliError::domain(format!("no ALO named `{name}`; create it first")));
            }
        }
        let pair = pair_name(a, b);
        if registry.contains(&pair) && !force {
            return Err(CliError::domain(format!("`{pair}` already exists; pass --force to replace it")));
        }
        let templates = self.templates()?;
        let prompt = templates.interaction_prompt(&registry, a, b, context)?;
        let alo = self.request_alo("interact", templates.system_prompt(SystemVariant::Markdown), &prompt, &pair)?;
        let rules = InteractionRule::from_pair_alo(&alo);
        let text = serialize(&alo);
        self.store(&mut registry, alo)?;
        say!(out, "{}", text.trim_end());
        if rules.is_empty() {
            say!(out, "\nno interaction rule: the policy has no `near` trigger");
        }
        for r in rules {
            say!(
                out,
                "\ninteraction rule: when {} is within {} of {}, {} runs `{}`",
                r.trigger_name(),
                r.trigger_radius,
                r.responder_name(),
                r.responder_name(),
                r.response_skill
            );
        }
        Ok(())
    }

    /// The scenario file if given, otherwise the default layout of the
    /// registry. An explicit `--seed` replaces the file's seed.
    pub fn scenario(&self, path: Option<&Path>, registry: &Registry) -> Result<Scenario, CliError> {
        let mut scenario = match path {
            Some(p) => read_json::<Scenario>(p)?,
            None => default_scenario(registry, self.settings.world.bounds, self.settings.world.dt),
        };
        if path.is_none() || self.settings.seed_explicit {
            scenario.seed = self.settings.seed;
        }
        Ok(scenario)
    }

    pub fn simulate(&self, scenario: Option<&Path>, ticks: u64, out: &mut dyn Write) -> Result<(), CliError> {
        let registry = self.open_registry()?;
        let scenario = self.scenario(scenario, &registry)?;
        let mut world = scenario.build_world(&registry)?;
        let trace = world.run(ticks, scenario.dt)?;
        let dir = &self.settings.out;
        trace.write(dir)?;
        say!(
            out,
            "simulated {} entities for {ticks} ticks (seed {}): {} steps, {} events",
            scenario.entities.len(),
            scenario.seed,
            trace.steps.len(),
            trace.events.len()
        );
        say!(out, "wrote {}", dir.join("trace.jsonl").display());
        say!(out, "wrote {}", dir.join("snapshots.jsonl").display());
        Ok(())
    }

    pub fn export(&self, scenario: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
        let registry = self.open_registry()?;
        let scenario = self.scenario(scenario, &registry)?;
        let bundle = emit_scene(&registry, &scenario)?;
        let dir = &self.settings.out;
        fs::create_dir_all(dir)?;
        let path = dir.join(BUNDLE_FILE);
        fs::write(&path, bundle.to_json())?;
        say!(
            out,
            "wrote {} ({} manifests, {} entities, {} rules)",
            path.display(),
            bundle.manifests.len(),
            bundle.entities.len(),
            bundle.interaction_rules.len()
        );
        for manifest in &bundle.manifests {
            let alo = registry.get(&manifest.alo_name)?;
            let script = emit_update_script(&alo, Dialect::HarnessScript.as_str())?;
            let path = dir.join(script_file_name(&alo.name, Dialect::HarnessScript));
            fs::write(&path, script)?;
            say!(out, "wrote {}", path.display());
        }
        Ok(())
    }

    pub fn analyze(&self, cfg: AnalyzeConfig, out: &mut dyn Write) -> Result<(), CliError> {
        if cfg.n < 2 {
            return Err(CliError::usage(format!("n must be at least 2, got {}", cfg.n)));
        }
        if cfg.temperatures.is_empty() {
            return Err(CliError::usage("at least one temperature is required"));
        }
        if let Some(t) = cfg.temperatures.iter().find(|t| !(0.0..=MAX_TEMPERATURE).contains(*t)) {
            return Err(CliError::usage(format!("temperature {t} outside [0, {MAX_TEMPERATURE}]")));
        }
        if cfg.user_prompt.trim().is_empty() {
            return Err(CliError::usage("the user prompt must not be empty"));
        }
        let system = match cfg.system_prompt_variant.as_str() {
            "none" | "" => None,
            "markdown" => Some(system_prompt(SystemVariant::Markdown)),
            "codegen" => Some(system_prompt(SystemVariant::Codegen)),
            other => {
                return Err(CliError::usage(format!(
                    "unknown system prompt variant `{other}`; expected none, markdown or codegen"
                )))
            }
        };
        let mut cfg = cfg;
        if self.settings.backend_explicit {
            cfg.backend = match self.settings.backend {
                BackendChoice::Mock => "mock".into(),
                BackendChoice::Live => "live".into(),
            };
        }
        if self.settings.seed_explicit {
            cfg.seed = self.settings.seed;
        }
        let backend: Box<dyn ChatBackend> = self.settings.backend(BackendChoice::parse(&cfg.backend)?)?;
        let options = TrialOptions {
            seed: cfg.seed,
            in_flight: self.settings.gateway.in_flight.max(1),
            ..TrialOptions::default()
        };
        let analysis = analyze(backend.as_ref(), system, &cfg.user_prompt, cfg.n, &cfg.temperatures, options)?;
        let dir = run_dir(&self.settings.out)?;
        analysis.write(&dir)?;
        let mut config_json = serde_json::to_string_pretty(&cfg)?;
        config_json.push('\n');
        fs::write(dir.join("config.json"), config_json)?;
        say!(out, "{:>11}  {:>10}  {:>10}  {:>5}", "temperature", "mean", "sd", "pairs");
        for s in &analysis.summaries {
            say!(
                out,
                "{:>11}  {:>10.6}  {:>10.6}  {:>5}",
                temperature_label(s.temperature),
                s.summary.mean,
                s.summary.sd,
                s.summary.count
            );
        }
        say!(out, "wrote {}", dir.display());
        Ok(())
    }

    pub fn image_prompt(&self, name: &str, suffix: &str, out: &mut dyn Write) -> Result<(), CliError> {
        if name.trim().is_empty() {
            return Err(CliError::usage("name must not be empty"));
        }
        let registry = self.open_registry()?;
        let alo = registry.get(name.trim())?;
        let lexicon = match &self.settings.lexicon {
            Some(path) => Lexicon::load(path)?,
            None => Lexicon::default(),
        };
        let prompt = self.templates()?.image_prompt(&alo, suffix)?;
        say!(out, "{prompt}");
        let c = classify_parameters(&alo, &lexicon);
        say!(out, "\nparameters:");
        for (path, class) in &c.classes {
            let label = match class.label {
                ParameterLabel::Visual => "visual",
                ParameterLabel::Performance => "performance",
                ParameterLabel::Other => "other",
            };
            if class.matched_keyword.is_empty() {
                say!(out, "  {path}: {label}");
            } else {
                say!(out, "  {path}: {label} ({})", class.matched_keyword);
            }
        }
        let (v, p, o) = (
            c.count(ParameterLabel::Visual),
            c.count(ParameterLabel::Performance),
            c.count(ParameterLabel::Other),
        );
        match c.visual_coverage {
            Some(cov) => say!(out, "visual coverage: {cov:.2} ({v} visual, {p} performance, {o} other)"),
            None => say!(out, "visual coverage: n/a (no parameters)"),
        }
        Ok(())
    }
}

/// `[SCENARIO] TICKS`.
fn simulate_args(args: &[String]) -> Result<(Option<PathBuf>, u64), CliError> {
    let (scenario, ticks) = match args {
        [ticks] => (None, ticks),
        [scenario, ticks] => (Some(PathBuf::from(scenario)), ticks),
        _ => return Err(CliError::usage("expected [SCENARIO] TICKS")),
    };
    let ticks = ticks
        .parse::<u64>()
        .map_err(|_| CliError::usage(format!("TICKS must be a non-negative integer, got `{ticks}`")))?;
    Ok((scenario, ticks))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::domain(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::domain(format!("{}: {e}", path.display())))
}

/// A fresh `<out>/<UTC timestamp>` directory.
fn run_dir(out: &Path) -> Result<PathBuf, CliError> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
    let mut dir = out.join(&stamp);
    let mut k = 1;
    while dir.exists() {
        dir = out.join(format!("{stamp}-{k}"));
        k += 1;
    }
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Every registered ALO that is not an interaction ALO, placed once on a
/// line through the middle of the floor, facing the centre; every
/// interaction ALO whose two parties are both placed is bound.
pub fn default_scenario(registry: &Registry, bounds: Bounds, dt: f64) -> Scenario {
    let mut entities = Vec::new();
    let mut interactions = Vec::new();
    for alo in registry.iter() {
        if InteractionRule::from_pair_alo(alo).is_empty() {
            entities.push(alo.name.clone());
        }
    }
    for alo in registry.iter() {
        let rules = InteractionRule::from_pair_alo(alo);
        if !rules.is_empty()
            && rules.iter().all(|r| entities.contains(&r.pair.0) && entities.contains(&r.pair.1))
        {
            interactions.push(alo.name.clone());
        }
    }
    let k = entities.len();
    let width = bounds.max[0] - bounds.min[0];
    let spacing = DEFAULT_SPACING.min(width / (k as f64 + 1.0));
    let centre = [
        (bounds.min[0] + bounds.max[0]) / 2.0,
        bounds.min[1],
        (bounds.min[2] + bounds.max[2]) / 2.0,
    ];
    let entities = entities
        .into_iter()
        .enumerate()
        .map(|(i, alo)| {
            let offset = (i as f64 - (k as f64 - 1.0) / 2.0) * spacing;
            EntitySpec {
                alo,
                position: [centre[0] + offset, centre[1], centre[2]],
                heading: if offset > 0.0 { std::f64::consts::PI } else { 0.0 },
            }
        })
        .collect();
    Scenario { bounds, seed: 0, dt, entities, interactions, rules: Vec::new() }
}
