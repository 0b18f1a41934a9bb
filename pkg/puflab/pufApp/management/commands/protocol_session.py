# pufApp/management/commands/protocol_session.py
from pathlib import Path

from django.conf import settings

from pufApp.adversary import CrpDatabase
from pufApp.choices import ChannelAdversaryKind, Scheme
from pufApp.cpuf import eval_batch, random_challenges
from pufApp.hybrid import DeviceSpec
from pufApp.management.base import LabCommand
from pufApp.protocol import (ClientState, ServerState, check_custody, check_reuse_safety,
                             export_transcript, make_channel_adversary, run_session)
from pufApp.utils.artifacts import write_json
from pufApp.utils.seeding import derive_rng, derive_seed


class Command(LabCommand):
    help = "Run one authentication session against a channel adversary.\n" \
           "Writes the session report (JSON) and the transcript (JSON lines, next to it)."

    name = 'protocol_session'
    default_out = 'protocol_session.json'
    config_flags = ('n', 'k', 'm', 'scheme', 'p', 'rounds', 'db_size', 'reuse_cap', 'adversary', 'flip_rate')

    def add_lab_arguments(self, parser):
        parser.add_argument('--n', type=int)
        parser.add_argument('--k', type=int)
        parser.add_argument('--m', type=int, help="qubits per half")
        parser.add_argument('--scheme', choices=Scheme.values)
        parser.add_argument('--p', type=float)
        parser.add_argument('--rounds', type=int)
        parser.add_argument('--db-size', dest='db_size', type=int)
        parser.add_argument('--reuse-cap', dest='reuse_cap', type=int,
                            help="times a challenge may be issued; 1 disables reuse, omit for unlimited")
        parser.add_argument('--adversary', choices=ChannelAdversaryKind.values)
        parser.add_argument('--flip-rate', dest='flip_rate', type=float,
                            help="response flip noise of the stored CRP table")
        parser.add_argument('--transcript', help="transcript path (default: <out>.jsonl)")

    def handle(self, *args, **options):
        self.transcript = options.get('transcript')
        super().handle(*args, **options)

    def run(self, config):
        spec = DeviceSpec(cpuf_kind=config.cpuf_kind, n=config.n, k=config.k, m=config.m,
                          scheme=config.scheme, p=config.p, flip_rate=config.flip_rate)
        device = spec.build_locked(derive_seed(config.seed, 0))
        # enrolment; flip noise only ever enters the stored table
        challenges = random_challenges(config.n, config.db_size, derive_rng(config.seed, 1))
        db = CrpDatabase(challenges, eval_batch(device.hpuf.cpuf, challenges, derive_rng(config.seed, 2)))
        server = ServerState(db, config.scheme, derive_rng(config.seed, 3), reuse_cap=config.reuse_cap,
                             tolerance=settings.HLPUF_LAB['VERIFY_EPSILON'])
        client = ClientState(device)
        adversary = make_channel_adversary(config.adversary, derive_rng(config.seed, 4))

        report = run_session(server, client, adversary, config.rounds, derive_rng(config.seed, 5))

        out = Path(config.out)
        transcript = Path(self.transcript) if self.transcript else out.with_suffix('.jsonl')
        payload = {'config_hash': config.digest, 'version': self.version, 'seed': config.seed,
                   'adversary': str(config.adversary), 'report': report.as_dict()}
        write_json(out, payload)
        export_transcript(report.outcomes, transcript)

        self.stdout.write(f"Rounds: {report.rounds_run}/{report.rounds_requested}, "
                          f"accepted {report.accepted}, client aborts {report.client_aborts}, "
                          f"server rejects {report.server_rejects}, retired {report.retired}")
        if report.exhausted:
            self.stdout.write(self.style.WARNING("Database exhausted before the last round."))

        violations = check_custody(report.outcomes) + check_reuse_safety(report.outcomes)
        if violations:
            for violation in violations:
                self.stdout.write(self.style.ERROR(violation))
            self.fail(f"{len(violations)} transcript invariant(s) violated")
        self.stdout.write(self.style.SUCCESS(f"Wrote {out} and {transcript}"))
        return f"acceptance {report.acceptance_rate:.4f}"
