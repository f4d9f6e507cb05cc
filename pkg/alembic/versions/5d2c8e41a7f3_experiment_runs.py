"""experiment_runs

Revision ID: 5d2c8e41a7f3
Revises: 
Create Date: 2026-10-18 10:12:03.418552

"""
from typing import Sequence, Union

from alembic import op
import sqlalchemy as sa


# revision identifiers, used by Alembic.
revision: str = '5d2c8e41a7f3'
down_revision: Union[str, None] = None
branch_labels: Union[str, Sequence[str], None] = None
depends_on: Union[str, Sequence[str], None] = None


def upgrade() -> None:
    op.create_table('experiment_run',
    sa.Column('id', sa.Integer(), autoincrement=True, nullable=False),
    sa.Column('command', sa.String(length=20), nullable=False),
    sa.Column('config_hash', sa.String(length=64), nullable=False),
    sa.Column('seed', sa.BigInteger(), nullable=False),
    sa.Column('status', sa.String(length=10), nullable=False),
    sa.Column('exit_code', sa.Integer(), nullable=False),
    sa.Column('summary_json', sa.Text(), nullable=True),
    sa.Column('created_at', sa.DateTime(), nullable=False),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_experiment_run_command'), 'experiment_run', ['command'], unique=False)
    op.create_index(op.f('ix_experiment_run_config_hash'), 'experiment_run', ['config_hash'], unique=False)


def downgrade() -> None:
    op.drop_index(op.f('ix_experiment_run_config_hash'), table_name='experiment_run')
    op.drop_index(op.f('ix_experiment_run_command'), table_name='experiment_run')
    op.drop_table('experiment_run')
